#include "moddrop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "moddrop/error.hpp"
#include "moddrop/evaluation.hpp"
#include "moddrop/ops.hpp"

namespace moddrop {

namespace {

constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kCodeStream = 1;

const char* kind_name(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::moddrop: return "moddrop";
        case RegimeKind::moddrop_plus: return "moddrop_plus";
        case RegimeKind::moddrop_plus_plus: return "moddrop_plus_plus";
        case RegimeKind::independent: return "independent";
    }
    return "?";
}

Rng code_stream(const StepContext& ctx, std::size_t j) {
    return Rng(derive_seed(ctx.seed, kCodeStream, ctx.epoch, ctx.first_position + j));
}

void require_finite(double value, const char* what, const StepContext& ctx) {
    if (!std::isfinite(value)) {
        std::ostringstream os;
        os << what << " is not finite (" << value << ") at epoch " << ctx.epoch << ", sample " << ctx.first_position;
        throw NumericsError(os.str());
    }
}

void require_batch(std::span<const MultiModalSample* const> batch, const SegmentationModel& model) {
    if (batch.empty()) {
        throw ConfigError("empty training batch");
    }
    for (const MultiModalSample* s : batch) {
        if (s->modality_count() != model.config().modalities || s->slices() != model.config().slices_per_modality) {
            throw ShapeError("sample " + std::to_string(s->subject_id) + " has " + std::to_string(s->modality_count()) +
                             " modalities x " + std::to_string(s->slices()) + " slices; model expects " +
                             std::to_string(model.config().modalities) + " x " +
                             std::to_string(model.config().slices_per_modality));
        }
    }
}

}  // namespace

Regime Regime::parse(const std::string& text) {
    if (text == "moddrop") return moddrop();
    if (text == "moddrop_plus") return moddrop_plus();
    if (text == "moddrop_plus_plus") return moddrop_plus_plus();
    if (text == "independent") return {RegimeKind::independent, {}};
    const std::string prefix = "independent:";
    if (text.rfind(prefix, 0) == 0) {
        return independent(ModalityCode::parse(text.substr(prefix.size())));
    }
    throw ConfigError("unknown regime '" + text +
                      "' (expected moddrop, moddrop_plus, moddrop_plus_plus or independent[:<code>])");
}

std::string Regime::name() const { return kind_name(kind); }

std::string Regime::str() const {
    std::string out = name();
    if (code) out += ":" + code->str();
    return out;
}

void TrainConfig::validate() const {
    if (epochs > 0 && decay_start_epoch >= epochs) {
        throw ConfigError("train.decay_start_epoch (" + std::to_string(decay_start_epoch) +
                          ") must be below train.epochs (" + std::to_string(epochs) + ")");
    }
    if (batch_size == 0) {
        throw ConfigError("train.batch_size must be positive");
    }
    if (!(lr0 > 0.0)) {
        throw ConfigError("train.lr0 must be positive");
    }
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0)) {
        throw ConfigError("Adam needs beta1, beta2 in [0, 1) and eps > 0");
    }
    if (val_every == 0) {
        throw ConfigError("train.val_every must be positive");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("threshold must lie in (0, 1)");
    }
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
    if (epoch < cfg.decay_start_epoch) return cfg.lr0;
    if (epoch >= cfg.epochs) return 0.0;
    return cfg.lr0 * static_cast<double>(cfg.epochs - epoch) / static_cast<double>(cfg.epochs - cfg.decay_start_epoch);
}

Tensor stack_input(const MultiModalSample& sample) {
    return apply_dropout(sample, ModalityCode::full(sample.modality_count()));
}

StepReport co_train_step(SegmentationModel& model, Adam& optimizer, std::span<const MultiModalSample* const> batch,
                         const StepContext& ctx) {
    require_batch(batch, model);
    const std::size_t k = model.config().modalities;
    const ModalityCode full = ModalityCode::full(k);
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    StepReport report;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        Rng rng = code_stream(ctx, j);
        report.codes.push_back(sample_config(ctx.policy, rng));
    }

    LossConfig loss = ctx.loss;
    if (!loss.dynamic_range) {
        NoGradGuard guard;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const MultiModalSample* s : batch) {
            const Tensor f = model.forward_dynamic(stack_input(*s), full);
            const auto [mn, mx] = std::minmax_element(f.data().begin(), f.data().end());
            lo = std::min(lo, *mn);
            hi = std::max(hi, *mx);
        }
        loss.dynamic_range = hi > lo ? hi - lo : 1.0;
    }

    model.zero_grad();
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const MultiModalSample& s = *batch[j];
        const Tensor target = s.label_tensor();
        const auto out_full = model.forward_split(stack_input(s), full);
        const auto out_missing = model.forward_split(apply_dropout(s, report.codes[j]), report.codes[j]);
        const ObjectiveTerms terms = combined_objective_terms(out_full.prediction, out_missing.prediction, target,
                                                              out_full.features, out_missing.features, loss);
        require_finite(terms.total.item(), "co-training objective", ctx);
        scale(terms.total, inv_n).backward();
        report.total += terms.total.item() * inv_n;
        report.focal_full += terms.focal_full.item() * inv_n;
        report.focal_missing += terms.focal_missing.item() * inv_n;
        report.ssim += terms.ssim.item() * inv_n;
    }
    optimizer.step(ctx.lr);
    return report;
}

StepReport train_step_static(SegmentationModel& model, Adam& optimizer, std::span<const MultiModalSample* const> batch,
                             const Regime& regime, const StepContext& ctx) {
    if (regime.kind == RegimeKind::moddrop_plus_plus) {
        throw ConfigError("train_step_static does not run the co-training regime");
    }
    require_batch(batch, model);
    const std::size_t k = model.config().modalities;
    if (regime.kind == RegimeKind::independent) {
        if (!regime.code) {
            throw ConfigError("independent regime needs a fixed modality code");
        }
        require_valid_code(*regime.code, k);
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    StepReport report;
    report.focal_full = std::numeric_limits<double>::quiet_NaN();
    report.ssim = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (regime.kind == RegimeKind::independent) {
            report.codes.push_back(*regime.code);
        } else {
            Rng rng = code_stream(ctx, j);
            report.codes.push_back(sample_config(ctx.policy, rng));
        }
    }

    model.zero_grad();
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const MultiModalSample& s = *batch[j];
        const ModalityCode& code = report.codes[j];
        const Tensor x = code.all() ? stack_input(s) : apply_dropout(s, code);
        const Tensor loss = moddrop_objective(model.forward_split(x, code).prediction, s.label_tensor(), ctx.loss);
        require_finite(loss.item(), "focal loss", ctx);
        scale(loss, inv_n).backward();
        report.total += loss.item() * inv_n;
        report.focal_missing += loss.item() * inv_n;
    }
    optimizer.step(ctx.lr);
    return report;
}

std::string format_training_log(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os.precision(17);
    os << kTrainingLogHeader << "\n";
    for (const EpochLog& e : log) {
        os << e.epoch << "," << e.regime << "," << e.code_mode << "," << e.focal_full << "," << e.focal_missing << ","
           << e.ssim << "," << e.lr << "\n";
    }
    return os.str();
}

SegmentationModel initial_model(const BackboneConfig& config, std::uint64_t seed) {
    Rng rng(derive_seed(seed, kInitStream));
    return SegmentationModel(config, rng);
}

std::vector<ModalityCode> regime_codes(const Regime& regime, std::size_t modalities) {
    if (regime.kind == RegimeKind::independent && regime.code) return {*regime.code};
    return enumerate_configs(modalities);
}

TrainingResult run_training(const Dataset& dataset, const TrainSetup& setup, const EpochCallback& on_epoch) {
    const TrainConfig& cfg = setup.train;
    cfg.validate();
    setup.model.validate();
    setup.loss.validate();
    setup.dropout.validate();
    if (dataset.samples.empty()) {
        throw ConfigError("cannot train on an empty dataset");
    }
    if (setup.dropout.modalities != setup.model.modalities) {
        throw ConfigError("dropout policy K differs from model K");
    }
    if (cfg.regime.kind == RegimeKind::independent) {
        if (!cfg.regime.code) {
            throw ConfigError("independent regime needs a fixed modality code");
        }
        require_valid_code(*cfg.regime.code, setup.model.modalities);
    }

    const DatasetSplit split = split_subjects(dataset.samples.size(), dataset.seed, cfg.test_fraction, cfg.val_fraction);
    if (split.train.empty()) {
        throw ConfigError("dataset of " + std::to_string(dataset.samples.size()) + " subjects leaves no training subjects");
    }
    const std::vector<const MultiModalSample*> train = select_samples(dataset, split.train);
    const std::vector<const MultiModalSample*> val = select_samples(dataset, split.val);
    const std::vector<ModalityCode> val_codes = regime_codes(cfg.regime, setup.model.modalities);

    SegmentationModel model = initial_model(setup.model, cfg.seed);
    model.set_head_trainable(cfg.regime.head_trainable());
    Adam optimizer(model.parameters(), cfg.adam);

    const auto snapshot = [&](std::size_t epochs_done) {
        Checkpoint ckpt = snapshot_parameters(model);
        for (const NamedTensor& t : optimizer.state()) ckpt.tensors.push_back({t.name, t.tensor.detach()});
        ckpt.epoch = epochs_done;
        ckpt.optimizer_steps = optimizer.steps();
        ckpt.rng_seed = cfg.seed;
        ckpt.rng_counter = epochs_done;
        ckpt.config_hash = setup.config_hash;
        ckpt.regime = cfg.regime.name();
        ckpt.fixed_code = cfg.regime.kind == RegimeKind::independent ? cfg.regime.code : std::nullopt;
        return ckpt;
    };

    const std::string code_mode = cfg.regime.kind == RegimeKind::independent ? "fixed:" + cfg.regime.code->str()
                                  : setup.dropout.mode == DropoutMode::uniform_over_configs ? "uniform"
                                                                                             : "bernoulli";
    TrainingResult result;
    bool validated = false;
    double best = -1.0;
    std::vector<const MultiModalSample*> order(train.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> perm(train.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng shuffle(derive_seed(cfg.seed, kShuffleStream, epoch));
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[shuffle.below(i)]);
        for (std::size_t i = 0; i < perm.size(); ++i) order[i] = train[perm[i]];

        const double lr = lr_at(epoch, cfg);
        EpochLog entry{epoch, cfg.regime.name(), code_mode, 0.0, 0.0, 0.0, lr};
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const MultiModalSample* const> batch(order.data() + start, end - start);
            const StepContext ctx{setup.dropout, setup.loss, lr, cfg.seed, epoch, start};
            const StepReport step = cfg.regime.kind == RegimeKind::moddrop_plus_plus
                                        ? co_train_step(model, optimizer, batch, ctx)
                                        : train_step_static(model, optimizer, batch, cfg.regime, ctx);
            const double weight = static_cast<double>(batch.size()) / static_cast<double>(order.size());
            entry.focal_full += step.focal_full * weight;
            entry.focal_missing += step.focal_missing * weight;
            entry.ssim += step.ssim * weight;
        }
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);

        if (!val.empty() && ((epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs)) {
            const double score = mean_dsc(model, val, val_codes, cfg.threshold);
            result.validation.emplace_back(epoch + 1, score);
            if (!validated || score > best) {
                best = score;
                result.best = snapshot(epoch + 1);
                result.best_epoch = epoch + 1;
            }
            validated = true;
        }
    }
    result.final = snapshot(cfg.epochs);
    if (!validated) {
        result.best = result.final;
        result.best_epoch = cfg.epochs;
    }
    result.best_val_dsc = validated ? best : std::numeric_limits<double>::quiet_NaN();
    return result;
}

}  // namespace moddrop
