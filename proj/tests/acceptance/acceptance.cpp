// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned here.
// Usage: moddrop_acceptance [criterion numbers...]   (default: all of 1-9)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "moddrop/checkpoint.hpp"
#include "moddrop/config.hpp"
#include "moddrop/data_synth.hpp"
#include "moddrop/dropout.hpp"
#include "moddrop/dynamic_head.hpp"
#include "moddrop/error.hpp"
#include "moddrop/evaluation.hpp"
#include "moddrop/gradcheck.hpp"
#include "moddrop/losses.hpp"
#include "moddrop/metrics.hpp"
#include "moddrop/ops.hpp"
#include "moddrop/tensor_io.hpp"
#include "moddrop/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace moddrop;
using testutil::uniform_tensor;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradStep = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSeconds = 60;
constexpr double kIdentityBudgetSeconds = 5;
constexpr double kDropoutBudgetSeconds = 10;
constexpr double kMetricsBudgetSeconds = 30;
constexpr double kFrequencyTol = 0.01;
constexpr double kCorrTol = 1e-12;
constexpr double kScoreTol = 1e-12;
constexpr double kFocalTol = 1e-12;
constexpr double kSsimSelfTol = 1e-12;
constexpr double kSsimOracleTol = 1e-8;
constexpr std::uint64_t kTrendSeeds[] = {1, 2, 3};
constexpr std::size_t kTrendMajority = 2;
constexpr std::size_t kRequiredPlusOverMd = 12;
constexpr std::size_t kRequiredPlusPlusOverPlus = 10;

struct Outcome {
    bool passed = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor binary_target(Shape shape, Rng& rng) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform() < 0.3 ? 1.0 : 0.0;
    return Tensor::from(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------- 1
Outcome gradient_integrity() {
    Stopwatch clock;
    Rng rng(101);
    GradCheckOptions opt;
    opt.h = kGradStep;
    opt.tol = kGradTol;
    std::vector<std::string> failed;
    double worst = 0.0;
    const auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> leaves) {
        const GradCheckReport r = grad_check(f, std::move(leaves), opt);
        worst = std::max(worst, r.worst());
        if (!r.passed()) failed.push_back(name);
    };

    const Tensor x = uniform_tensor({2, 3, 6, 5}, rng, -1, 1, true);
    const Tensor w = uniform_tensor({4, 3, 3, 3}, rng, -1, 1, true);
    const Tensor b = uniform_tensor({4}, rng, -1, 1, true);
    check("conv2d", [&] { return sum(square(conv2d(x, w, b, 1, 1))); }, {x, w, b});
    check("conv2d/stride2", [&] { return sum(square(conv2d(x, w, b, 2, 0))); }, {x, w, b});

    const Tensor a = uniform_tensor({3, 4}, rng, 0.2, 2.0, true);
    const Tensor c = uniform_tensor({3, 4}, rng, 0.2, 2.0, true);
    const Tensor probe = uniform_tensor({3, 4}, rng);
    const auto weigh = [&](const Tensor& t) { return sum(mul(t, probe)); };
    check("relu", [&] { return weigh(relu(add_scalar(a, -1.1))); }, {a});
    check("sigmoid", [&] { return weigh(sigmoid(a)); }, {a});
    check("square", [&] { return weigh(square(a)); }, {a});
    check("log", [&] { return weigh(log(a)); }, {a});
    check("neg", [&] { return weigh(neg(a)); }, {a});
    check("add", [&] { return weigh(add(a, c)); }, {a, c});
    check("sub", [&] { return weigh(sub(a, c)); }, {a, c});
    check("mul", [&] { return weigh(mul(a, c)); }, {a, c});
    check("div", [&] { return weigh(div(a, c)); }, {a, c});
    check("scale", [&] { return weigh(scale(a, -2.5)); }, {a});
    check("mean", [&] { return mean(square(a)); }, {a});

    const Tensor img = uniform_tensor({1, 2, 9, 8}, rng, -1, 1, true);
    const Tensor img_probe = uniform_tensor({1, 2, 9, 8}, rng);
    check("gaussian_window_filter", [&] { return sum(mul(gaussian_window_filter(img, 5, 1.5), img_probe)); }, {img});

    LossConfig loss;
    const Tensor p = uniform_tensor({1, 1, 6, 6}, rng, 0.05, 0.95, true);
    const Tensor y = binary_target({1, 1, 6, 6}, rng);
    check("focal_loss", [&] { return focal_loss(p, y, loss); }, {p});

    LossConfig sl;
    sl.ssim_window = 5;
    const Tensor f = uniform_tensor({1, 2, 7, 7}, rng, -1, 1, true);
    const Tensor g = uniform_tensor({1, 2, 7, 7}, rng, -1, 1, true);
    sl.dynamic_range = dynamic_range_of(f);
    check("ssim", [&] { return ssim(f, g, sl); }, {f, g});

    const Tensor p2 = uniform_tensor({1, 1, 7, 7}, rng, 0.05, 0.95, true);
    const Tensor yy = binary_target({1, 1, 7, 7}, rng);
    const Tensor pm = uniform_tensor({1, 1, 7, 7}, rng, 0.05, 0.95, true);
    check("combined_objective", [&] { return combined_objective(p2, pm, yy, f, g, sl); }, {p2, pm, f, g});

    BackboneConfig bc;
    bc.modalities = 2;
    bc.slices_per_modality = 1;
    bc.first_layer_out = 3;
    bc.dense_blocks = 2;
    bc.layers_per_block = 1;
    bc.growth_rate = 2;
    SegmentationModel model(bc, rng);
    for (double& v : model.parameters()[0].tensor.mutable_data()) v = rng.uniform(-0.3, 0.3);
    LossConfig ml;
    ml.ssim_window = 3;
    ml.dynamic_range = 1.0;
    const Tensor in = uniform_tensor({1, 2, 6, 6}, rng, 0, 1);
    const Tensor target = binary_target({1, 1, 6, 6}, rng);
    const ModalityCode missing = ModalityCode::parse("01");
    const Tensor in_missing = apply_dropout(in, missing);
    std::vector<Tensor> leaves;
    for (const auto& prm : model.parameters()) leaves.push_back(prm.tensor);
    check("two-block model", [&] {
        const auto full = model.forward_split(in, ModalityCode::full(2));
        const auto part = model.forward_split(in_missing, missing);
        return combined_objective(full.prediction, part.prediction, target, full.features, part.features, ml);
    }, leaves);

    const double secs = clock.seconds();
    std::string detail = fmt("worst relative error %.2e over 19 checks, %.1f s", worst, secs);
    for (const auto& n : failed) detail += "; failed " + n;
    return {failed.empty() && secs < kGradBudgetSeconds, detail};
}

// ---------------------------------------------------------------- 2
Outcome identity_equivalence() {
    Stopwatch clock;
    Rng rng(202);
    DynamicConvLayer layer;
    layer.base_weight = uniform_tensor({32, 12, 3, 3}, rng);
    layer.base_bias = uniform_tensor({32}, rng);
    layer.head = DynamicHeadParams::identity(12, 32, 4);
    const auto codes = enumerate_configs(4);
    std::size_t mismatches = 0, comparisons = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor x = uniform_tensor({1, 12, 16, 16}, rng, -2, 2);
        const Tensor ref = conv2d(x, layer.base_weight, layer.base_bias, 1, 1);
        for (const auto& code : codes) {
            ++comparisons;
            if (!testutil::bit_equal(dynamic_forward(layer, x, code).data(), ref.data())) ++mismatches;
        }
    }
    const double secs = clock.seconds();
    return {mismatches == 0 && comparisons == 1500 && secs < kIdentityBudgetSeconds,
            fmt("%zu/%zu outputs bit-equal, %.2f s", comparisons - mismatches, comparisons, secs)};
}

// ---------------------------------------------------------------- 3
Outcome parameter_count_law() {
    Rng rng(303);
    std::size_t ok = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t u = 1 + rng.below(64), v = 1 + rng.below(64);
        const std::size_t p = 1 + 2 * rng.below(4), q = 1 + 2 * rng.below(4);
        const ScalingParamCount c = scaling_param_count(u, v, p, q);
        // Independent count from the materialized parameter tensors.
        const std::size_t generated = Tensor::zeros({v, u, p, q}).numel() + Tensor::zeros({v}).numel();
        const std::size_t scales = DynamicHeadParams::identity(u, v, 4).scale_count();
        if (c.full == u * v * p * q + v && c.scaled == u * v + v && c.full == generated && c.scaled == scales) ++ok;
    }
    return {ok == 20, fmt("%zu/20 random (u,v,p,q) tuples exact", ok)};
}

// ---------------------------------------------------------------- 4
Outcome dropout_correctness() {
    Stopwatch clock;
    bool enumeration_ok = true;
    for (std::size_t k = 1; k <= 8; ++k) {
        std::set<std::uint32_t> seen;
        for (const auto& c : enumerate_configs(k)) {
            if (!c.any() || c.size() != k) enumeration_ok = false;
            seen.insert(c.mask());
        }
        enumeration_ok = enumeration_ok && seen.size() == (1u << k) - 1 && enumerate_configs(k).size() == seen.size();
    }

    DropoutPolicy policy;
    Rng rng(404);
    std::map<std::uint32_t, std::size_t> counts;
    constexpr std::size_t kDraws = 150000;
    for (std::size_t i = 0; i < kDraws; ++i) ++counts[sample_config(policy, rng).mask()];
    double worst = 0.0;
    for (const auto& [mask, n] : counts) worst = std::max(worst, std::abs(static_cast<double>(n) / kDraws - 1.0 / 15));
    const bool frequency_ok = counts.size() == 15 && worst <= kFrequencyTol;

    SynthConfig sc;
    sc.size = 24;
    const MultiModalSample s = generate_subject(sc, 0);
    bool zeroing_ok = true;
    for (const auto& code : enumerate_configs(4)) {
        const Tensor x = apply_dropout(s, code);
        // x~ = x * m, modality by modality.
        std::vector<double> oracle;
        for (std::size_t m = 0; m < 4; ++m)
            for (double v : s.modalities[m].data()) oracle.push_back(v * (code[m] ? 1.0 : 0.0));
        zeroing_ok = zeroing_ok && testutil::bit_equal(x.data(), oracle);
    }
    const double secs = clock.seconds();
    return {enumeration_ok && frequency_ok && zeroing_ok && secs < kDropoutBudgetSeconds,
            fmt("enumeration K=1..8 %s, max |freq - 1/15| = %.4f over %zu draws, zeroing %s, %.2f s",
                enumeration_ok ? "ok" : "WRONG", worst, kDraws, zeroing_ok ? "bitwise" : "MISMATCH", secs)};
}

// ---------------------------------------------------------------- 5
Outcome metric_oracles() {
    Stopwatch clock;
    Rng rng(505);
    std::size_t exact = 0;
    std::vector<SubjectMetrics> rows;
    std::vector<double> pv, gv;
    double corr_err = 0.0;
    const auto random_mask = [&](const Shape& shape, double density) {
        BinaryMask m(shape);
        for (auto& bit : m.bits) bit = rng.uniform() < density ? 1 : 0;
        return m;
    };
    for (int trial = 0; trial < 500; ++trial) {
        const Shape shape = trial % 2 ? Shape{16, 16} : Shape{8, 8, 8};
        const double density = 0.02 + 0.3 * rng.uniform();
        const BinaryMask pred = random_mask(shape, density), gt = random_mask(shape, density);
        const oracle::Metrics o = oracle::mask_metrics(pred.bits, gt.bits, shape);
        const SubjectMetrics m = subject_metrics(pred, gt, default_connectivity(pred));
        const bool vd_ok = m.vd == o.vd || (std::isnan(m.vd) && std::isnan(o.vd));
        if (m.dsc == o.dsc && m.ppv == o.ppv && m.tpr == o.tpr && vd_ok && m.ltpr == o.ltpr && m.lfpr == o.lfpr)
            ++exact;
        rows.push_back(m);
        pv.push_back(static_cast<double>(pred.count()));
        gv.push_back(static_cast<double>(gt.count()));
        if (rows.size() == 10) {
            // Corr across each group of ten subjects.
            corr_err = std::max(corr_err, std::abs(aggregate(rows).corr - oracle::pearson(pv, gv)));
            rows.clear(), pv.clear(), gv.clear();
        }
    }
    MetricsReport r;
    r.dsc = 0.704, r.ppv = 0.8, r.lfpr = 0.2, r.ltpr = 0.7, r.corr = 0.9;
    const double hand = std::abs(overall_score(r) - 0.788);
    r.dsc = 1, r.ppv = 1, r.lfpr = 0, r.ltpr = 1, r.corr = 1;
    const double perfect = std::abs(overall_score(r) - 1.0);
    const double secs = clock.seconds();
    const bool ok = exact == 500 && corr_err < kCorrTol && hand < kScoreTol && perfect < kScoreTol &&
                    secs < kMetricsBudgetSeconds;
    return {ok, fmt("%zu/500 mask pairs exact on dsc/ppv/tpr/vd/ltpr/lfpr, corr err %.1e, SC err %.1e (0.788) "
                    "%.1e (perfect), %.2f s",
                    exact, corr_err, hand, perfect, secs)};
}

// ---------------------------------------------------------------- 6
Outcome loss_fixtures() {
    Rng rng(606);
    LossConfig bce_cfg;
    bce_cfg.focal_alpha = 0.5;
    bce_cfg.focal_gamma = 0.0;
    const Tensor p = uniform_tensor({2, 1, 8, 8}, rng, 0.01, 0.99);
    const Tensor y = binary_target({2, 1, 8, 8}, rng);
    double bce = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i)
        bce -= y.at(i) * std::log(p.at(i)) + (1 - y.at(i)) * std::log(1 - p.at(i));
    bce /= static_cast<double>(p.numel());
    const double focal_err = std::abs(focal_loss(p, y, bce_cfg).item() - 0.5 * bce);

    LossConfig cfg;  // alpha, beta, gamma = 1, 1, 0.05
    const Tensor f = uniform_tensor({1, 4, 16, 16}, rng, -3, 3);
    const double self_err = std::abs(ssim(f, f, cfg).item() - 1.0);

    const Tensor a = uniform_tensor({1, 1, 16, 16}, rng);
    const Tensor b = add(a, uniform_tensor({1, 1, 16, 16}, rng, -0.5, 0.5));
    const double oracle_err = std::abs(ssim(a, b, cfg).item() - oracle::ssim(a, b, 11, 1.5, dynamic_range_of(a)));

    const Tensor pf = uniform_tensor({1, 1, 16, 16}, rng, 0.05, 0.95);
    const Tensor pm = uniform_tensor({1, 1, 16, 16}, rng, 0.05, 0.95);
    const Tensor t = binary_target({1, 1, 16, 16}, rng);
    const Tensor fi = uniform_tensor({1, 4, 16, 16}, rng, -3, 3);
    const ObjectiveTerms terms = combined_objective_terms(pf, pm, t, f, fi, cfg);
    const double ff = oracle::focal(values(pf), values(t), 0.25, 2.0);
    const double fm = oracle::focal(values(pm), values(t), 0.25, 2.0);
    const double s = oracle::ssim(f, fi, 11, 1.5, dynamic_range_of(f));
    const double composition_err = std::max({std::abs(terms.focal_full.item() - ff),
                                             std::abs(terms.focal_missing.item() - fm),
                                             std::abs(terms.ssim.item() - s),
                                             std::abs(terms.total.item() - (1.0 * ff + 1.0 * fm + 0.05 * (1 - s)))});
    const bool ok = cfg.alpha == 1.0 && cfg.beta == 1.0 && cfg.gamma == 0.05 && focal_err < kFocalTol &&
                    self_err < kSsimSelfTol && oracle_err < kSsimOracleTol && composition_err < kSsimOracleTol;
    return {ok, fmt("focal vs 0.5*BCE %.1e, SSIM(f,f)-1 %.1e, SSIM vs window oracle %.1e, objective terms %.1e",
                    focal_err, self_err, oracle_err, composition_err)};
}

// ---------------------------------------------------------------- 7
TrainSetup toy_setup(Regime regime) {
    TrainSetup s;
    s.model.first_layer_out = 6;
    s.model.dense_blocks = 1;
    s.model.layers_per_block = 2;
    s.model.growth_rate = 4;
    s.train.regime = std::move(regime);
    s.train.epochs = 5;
    s.train.decay_start_epoch = 2;
    s.train.batch_size = 2;
    s.train.val_every = 5;
    s.loss.ssim_window = 5;
    return s;
}

Dataset toy_dataset() {
    SynthConfig sc;
    sc.size = 16;
    sc.radius_max = 3.0;
    sc.seed = 3;
    return generate_dataset(sc, 10);
}

bool same_tensors(const Checkpoint& a, const Checkpoint& b) {
    if (a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        if (a.tensors[i].name != b.tensors[i].name ||
            !testutil::bit_equal(a.tensors[i].tensor.data(), b.tensors[i].tensor.data()))
            return false;
    }
    return true;
}

Outcome regime_algebra() {
    const Dataset data = toy_dataset();
    TrainSetup algebra = toy_setup(Regime::moddrop_plus_plus());
    algebra.loss.alpha = 0.0;
    algebra.loss.gamma = 0.0;
    const TrainingResult plus = run_training(data, toy_setup(Regime::moddrop_plus()));
    const TrainingResult plus_plus = run_training(data, algebra);
    const bool trajectories = same_tensors(plus.final, plus_plus.final) && same_tensors(plus.best, plus_plus.best);
    bool losses_equal = plus.log.size() == plus_plus.log.size();
    for (std::size_t e = 0; losses_equal && e < plus.log.size(); ++e)
        losses_equal = plus.log[e].focal_missing == plus_plus.log[e].focal_missing;

    // MD: head gradients are zero at every step and the head never moves.
    const TrainSetup md = toy_setup(Regime::moddrop());
    SegmentationModel model = initial_model(md.model, md.train.seed);
    model.set_head_trainable(false);
    Adam opt(model.parameters(), md.train.adam);
    std::vector<const MultiModalSample*> batch{&data.samples[0], &data.samples[1]};
    bool head_grads_zero = true;
    for (std::uint64_t step = 0; step < 5; ++step) {
        train_step_static(model, opt, batch, md.train.regime, {md.dropout, md.loss, 0.01, 1, step, 0});
        for (const Tensor& t : model.head_parameters())
            for (double g : t.grad()) head_grads_zero = head_grads_zero && g == 0.0;
    }
    const TrainingResult run = run_training(data, md);
    const Checkpoint init = snapshot_parameters(initial_model(md.model, md.train.seed));
    bool head_fixed = true;
    for (const char* name : {"fd.head.weight", "fd.head.bias"})
        head_fixed = head_fixed && testutil::bit_equal(run.final.find(name)->data(), init.find(name)->data());
    return {trajectories && losses_equal && head_grads_zero && head_fixed,
            fmt("MD++(alpha=gamma=0) vs MD+ over 5 epochs: parameters %s, losses %s; MD head grads %s, head %s",
                trajectories ? "bit-identical" : "DIFFER", losses_equal ? "identical" : "DIFFER",
                head_grads_zero ? "zero" : "NONZERO", head_fixed ? "unchanged" : "MOVED")};
}

// ---------------------------------------------------------------- 8
struct SeedTrend {
    std::vector<double> md, plus, plus_plus, im;
    double ssim_gamma = 0, ssim_zero = 0;
    bool a = false, b = false, c = false, d = false, e = false;
    std::size_t a_count = 0, b_count = 0;
    double gap_md = 0, gap_plus_plus = 0;
    std::string c_failures;
};

std::vector<double> config_dsc(const std::vector<ConfigResult>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.report.dsc);
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

SeedTrend trend_for_seed(std::uint64_t seed) {
    RunConfig cfg = RunConfig::load(MODDROP_TREND_CONFIG);
    cfg.set("synth.seed", std::to_string(seed));
    cfg.set("train.seed", std::to_string(seed));
    cfg.finalize();
    const Dataset ds = generate_dataset(cfg.synth, cfg.subjects);
    const DatasetSplit split = split_subjects(ds.samples.size(), ds.seed, cfg.train.test_fraction, cfg.train.val_fraction);
    const auto test = select_samples(ds, split.test);
    const auto codes = enumerate_configs(cfg.synth.modalities);

    const auto train = [&](const Regime& regime, double gamma) {
        TrainSetup setup = cfg.train_setup();
        setup.train.regime = regime;
        setup.loss.gamma = gamma;
        return run_training(ds, setup);
    };
    SeedTrend t;
    t.md = config_dsc(evaluate_unified(model_from_checkpoint(train(Regime::moddrop(), cfg.loss.gamma).best), test, cfg.eval));
    t.plus = config_dsc(
        evaluate_unified(model_from_checkpoint(train(Regime::moddrop_plus(), cfg.loss.gamma).best), test, cfg.eval));
    const TrainingResult pp = train(Regime::moddrop_plus_plus(), cfg.loss.gamma);
    t.plus_plus = config_dsc(evaluate_unified(model_from_checkpoint(pp.best), test, cfg.eval));
    t.ssim_gamma = held_out_feature_ssim(model_from_checkpoint(pp.final), test, cfg.loss);
    const TrainingResult pp0 = train(Regime::moddrop_plus_plus(), 0.0);
    t.ssim_zero = held_out_feature_ssim(model_from_checkpoint(pp0.final), test, cfg.loss);
    for (const auto& code : codes) {
        const TrainingResult r = train(Regime::independent(code), cfg.loss.gamma);
        t.im.push_back(evaluate_code(model_from_checkpoint(r.best), test, code, cfg.eval).dsc);
    }

    for (std::size_t i = 0; i < codes.size(); ++i) {
        t.a_count += t.plus[i] >= t.md[i];
        t.b_count += t.plus_plus[i] >= t.plus[i];
    }
    t.a = t.a_count >= kRequiredPlusOverMd;
    t.b = t.b_count >= kRequiredPlusPlusOverPlus;

    // FLAIR-like modality is index 1; pair every FLAIR-absent code with the code that adds it.
    t.c = true;
    const char* regime_names[] = {"MD", "MD+", "MD++", "IM"};
    const std::vector<double>* regimes[] = {&t.md, &t.plus, &t.plus_plus, &t.im};
    for (int ri = 0; ri < 4; ++ri) {
        const std::vector<double>* regime = regimes[ri];
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (codes[i][1]) continue;
            const std::uint32_t with_flair = codes[i].mask() | (1u << 1);
            for (std::size_t j = 0; j < codes.size(); ++j)
                if (codes[j].mask() == with_flair && !((*regime)[i] < (*regime)[j])) {
                    t.c = false;
                    t.c_failures += fmt(" %s %s %.3f >= %s %.3f;", regime_names[ri], codes[i].str().c_str(),
                                        (*regime)[i], codes[j].str().c_str(), (*regime)[j]);
                }
        }
    }
    t.d = t.ssim_gamma > t.ssim_zero;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        t.gap_md += (t.im[i] - t.md[i]) / static_cast<double>(codes.size());
        t.gap_plus_plus += (t.im[i] - t.plus_plus[i]) / static_cast<double>(codes.size());
    }
    t.e = t.gap_plus_plus < t.gap_md;
    return t;
}

Outcome trend_reproduction() {
    Stopwatch clock;
    std::size_t votes[5] = {};
    for (std::uint64_t seed : kTrendSeeds) {
        Stopwatch seed_clock;
        const SeedTrend t = trend_for_seed(seed);
        votes[0] += t.a, votes[1] += t.b, votes[2] += t.c, votes[3] += t.d, votes[4] += t.e;
        std::printf("  seed %llu: mean DSC MD %.3f MD+ %.3f MD++ %.3f IM %.3f | (a) %zu/15 %s (b) %zu/15 %s "
                    "(c) %s%s (d) SSIM %.3f vs %.3f %s (e) gap %.3f vs %.3f %s [%.0f s]\n",
                    static_cast<unsigned long long>(seed), mean_of(t.md), mean_of(t.plus), mean_of(t.plus_plus),
                    mean_of(t.im), t.a_count, t.a ? "ok" : "no", t.b_count, t.b ? "ok" : "no", t.c ? "ok" : "no", t.c_failures.c_str(),
                    t.ssim_gamma, t.ssim_zero, t.d ? "ok" : "no", t.gap_plus_plus, t.gap_md, t.e ? "ok" : "no",
                    seed_clock.seconds());
        std::fflush(stdout);
    }
    bool ok = true;
    std::string detail = "majority of 3 seeds:";
    const char* names[] = {"a", "b", "c", "d", "e"};
    for (int i = 0; i < 5; ++i) {
        const bool pass = votes[i] >= kTrendMajority;
        ok = ok && pass;
        detail += fmt(" (%s) %zu/3%s", names[i], votes[i], pass ? "" : " FAIL");
    }
    return {ok, detail + fmt(", %.0f s", clock.seconds())};
}

// ---------------------------------------------------------------- 9
std::string checkpoint_bytes(const Checkpoint& c) {
    std::ostringstream out(std::ios::binary);
    write_checkpoint(out, c);
    return out.str();
}

// Truncations, a flipped magic byte and trailing junk must each surface as
// a library error.
template <typename Reader>
std::size_t count_untyped_failures(const std::string& good, Reader read) {
    std::size_t bad = 0;
    const auto attempt = [&](const std::string& bytes) {
        try {
            read(bytes);
        } catch (const Error&) {
            return;
        } catch (...) {
        }
        ++bad;
    };
    for (std::size_t cut = 0; cut < good.size(); cut += std::max<std::size_t>(1, good.size() / 200)) {
        attempt(good.substr(0, cut));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        std::string flipped = good;
        flipped[i] = static_cast<char>(flipped[i] ^ 0xFF);
        attempt(flipped);
    }
    attempt(good + "junk");
    return bad;
}

Outcome determinism_and_persistence() {
    const Dataset data = toy_dataset();
    const TrainSetup setup = toy_setup(Regime::moddrop_plus_plus());
    const TrainingResult a = run_training(data, setup);
    const TrainingResult b = run_training(data, setup);
    const bool logs = format_training_log(a.log) == format_training_log(b.log);
    const bool checkpoints = checkpoint_bytes(a.final) == checkpoint_bytes(b.final) &&
                             checkpoint_bytes(a.best) == checkpoint_bytes(b.best);
    const bool data_det = bitwise_equal(toy_dataset(), data);

    const std::string first = checkpoint_bytes(a.final);
    std::istringstream in(first);
    const bool ckpt_round = checkpoint_bytes(read_checkpoint(in)) == first;

    testutil::TempDir dir("acceptance");
    save_dataset(dir / "one", data);
    save_dataset(dir / "two", load_dataset(dir / "one"));
    bool data_round = bitwise_equal(load_dataset(dir / "two"), data);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "one")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), dir / "one");
        data_round = data_round && testutil::read_bytes(entry.path()) == testutil::read_bytes(dir.path() / "two" / rel);
    }

    std::size_t untyped = 0;
    untyped += count_untyped_failures(first, [](const std::string& bytes) {
        std::istringstream s(bytes);
        read_checkpoint(s);
    });
    const auto manifest_path = dir.path() / "one" / "manifest.txt";
    const auto flair_path = dir.path() / "one" / "subject_000" / "flair.mdt";
    const std::string manifest = testutil::read_bytes(manifest_path);
    const std::string flair = testutil::read_bytes(flair_path);
    untyped += count_untyped_failures(flair, [&](const std::string& bytes) {
        testutil::write_bytes(flair_path, bytes);
        load_dataset(dir / "one");
    });
    testutil::write_bytes(flair_path, flair);
    for (std::size_t cut : {std::size_t{0}, manifest.size() / 4, manifest.size() / 2}) {
        testutil::write_bytes(manifest_path, manifest.substr(0, cut));
        try {
            load_dataset(dir / "one");
            ++untyped;
        } catch (const Error&) {
        }
    }
    const bool ok = logs && checkpoints && data_det && ckpt_round && data_round && untyped == 0;
    return {ok, fmt("logs %s, checkpoints %s, dataset %s, checkpoint round trip %s, dataset round trip %s, "
                    "%zu corruptions without a typed error",
                    logs ? "identical" : "DIFFER", checkpoints ? "identical" : "DIFFER",
                    data_det ? "identical" : "DIFFER", ckpt_round ? "byte-identical" : "DIFFERS",
                    data_round ? "byte-identical" : "DIFFERS", untyped)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"gradient integrity", gradient_integrity},
        {"identity equivalence", identity_equivalence},
        {"parameter-count law", parameter_count_law},
        {"dropout correctness", dropout_correctness},
        {"metric oracle equivalence", metric_oracles},
        {"loss fixtures", loss_fixtures},
        {"regime algebra", regime_algebra},
        {"trend reproduction", trend_reproduction},
        {"determinism and persistence", determinism_and_persistence},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(number)) continue;
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("threw: ") + e.what()};
        }
        failures += !outcome.passed;
        std::printf("criterion %d (%s): %s: %s\n", number, criteria[i].first, outcome.passed ? "PASS" : "FAIL",
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
