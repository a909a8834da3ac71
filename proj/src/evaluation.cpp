#include "moddrop/evaluation.hpp"

#include <algorithm>
#include <set>

#include "moddrop/dropout.hpp"
#include "moddrop/error.hpp"
#include "moddrop/modality_code.hpp"

namespace moddrop {

std::vector<const MultiModalSample*> select_samples(const Dataset& dataset, std::span<const std::size_t> indices) {
    std::vector<const MultiModalSample*> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(&dataset.samples.at(i));
    return out;
}

Tensor predict(const SegmentationModel& model, const MultiModalSample& sample, const ModalityCode& code) {
    NoGradGuard guard;
    require_valid_code(code, model.config().modalities);
    return model.forward_split(apply_dropout(sample, code), code).prediction;
}

BinaryMask predict_mask(const SegmentationModel& model, const MultiModalSample& sample, const ModalityCode& code,
                        double threshold) {
    return threshold_mask(predict(model, sample, code), threshold);
}

MetricsReport evaluate_code(const SegmentationModel& model, std::span<const MultiModalSample* const> samples,
                            const ModalityCode& code, const EvalOptions& options) {
    std::vector<SubjectMetrics> rows;
    rows.reserve(samples.size());
    for (const MultiModalSample* s : samples) {
        const BinaryMask pred = predict_mask(model, *s, code, options.threshold);
        SubjectMetrics m = subject_metrics(pred, s->label, Connectivity::planar8, options.min_overlap);
        m.subject_id = s->subject_id;
        rows.push_back(m);
    }
    return aggregate(std::move(rows));
}

std::vector<ConfigResult> evaluate_unified(const SegmentationModel& model,
                                           std::span<const MultiModalSample* const> samples,
                                           const EvalOptions& options) {
    std::vector<ConfigResult> out;
    for (const ModalityCode& code : enumerate_configs(model.config().modalities)) {
        out.push_back({code, evaluate_code(model, samples, code, options)});
    }
    return out;
}

std::vector<ConfigResult> evaluate_independent(std::span<const std::pair<ModalityCode, SegmentationModel>> models,
                                               std::span<const MultiModalSample* const> samples,
                                               const EvalOptions& options) {
    if (models.empty()) {
        throw ConfigError("no independent models to evaluate");
    }
    const std::size_t k = models.front().second.config().modalities;
    const std::vector<ModalityCode> codes = enumerate_configs(k);
    std::set<std::uint32_t> seen;
    for (const auto& [code, model] : models) {
        if (code.size() != k || model.config().modalities != k) {
            throw ConfigError("independent model for " + code.str() + " does not match K=" + std::to_string(k));
        }
        if (!seen.insert(code.mask()).second) {
            throw ConfigError("two independent models claim code " + code.str());
        }
    }
    if (seen.size() != codes.size()) {
        throw ConfigError("independent models cover " + std::to_string(seen.size()) + " of " +
                          std::to_string(codes.size()) + " configurations");
    }
    std::vector<ConfigResult> out;
    for (const ModalityCode& code : codes) {
        const auto it = std::find_if(models.begin(), models.end(), [&](const auto& p) { return p.first == code; });
        out.push_back({code, evaluate_code(it->second, samples, code, options)});
    }
    return out;
}

double mean_dsc(const SegmentationModel& model, std::span<const MultiModalSample* const> samples,
                std::span<const ModalityCode> codes, double threshold) {
    if (samples.empty() || codes.empty()) {
        throw ConfigError("mean_dsc needs samples and codes");
    }
    double total = 0.0;
    for (const ModalityCode& code : codes) {
        for (const MultiModalSample* s : samples) {
            total += voxel_metrics(predict_mask(model, *s, code, threshold), s->label).dsc;
        }
    }
    return total / static_cast<double>(codes.size() * samples.size());
}

double held_out_feature_ssim(const SegmentationModel& model, std::span<const MultiModalSample* const> samples,
                             const LossConfig& loss) {
    NoGradGuard guard;
    const std::size_t k = model.config().modalities;
    const ModalityCode full = ModalityCode::full(k);
    double total = 0.0;
    std::size_t count = 0;
    for (const MultiModalSample* s : samples) {
        const Tensor f = model.forward_dynamic(apply_dropout(*s, full), full);
        LossConfig cfg = loss;
        if (!cfg.dynamic_range) cfg.dynamic_range = dynamic_range_of(f);
        for (const ModalityCode& code : enumerate_configs(k)) {
            if (code.all()) continue;
            const Tensor fi = model.forward_dynamic(apply_dropout(*s, code), code);
            total += ssim(f, fi, cfg).item();
            ++count;
        }
    }
    if (count == 0) {
        throw ConfigError("held-out SSIM needs samples and K >= 2");
    }
    return total / static_cast<double>(count);
}

}  // namespace moddrop
