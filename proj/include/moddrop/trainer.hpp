#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moddrop/backbone.hpp"
#include "moddrop/checkpoint.hpp"
#include "moddrop/data_synth.hpp"
#include "moddrop/dropout.hpp"
#include "moddrop/losses.hpp"
#include "moddrop/optim.hpp"

namespace moddrop {

enum class RegimeKind { moddrop, moddrop_plus, moddrop_plus_plus, independent };

struct Regime {
    RegimeKind kind = RegimeKind::moddrop_plus_plus;
    std::optional<ModalityCode> code;  // required for independent

    static Regime moddrop() { return {RegimeKind::moddrop, {}}; }
    static Regime moddrop_plus() { return {RegimeKind::moddrop_plus, {}}; }
    static Regime moddrop_plus_plus() { return {RegimeKind::moddrop_plus_plus, {}}; }
    static Regime independent(ModalityCode c) { return {RegimeKind::independent, std::move(c)}; }

    // "moddrop", "moddrop_plus", "moddrop_plus_plus", "independent" or "independent:<bits>".
    static Regime parse(const std::string& text);
    std::string name() const;  // kind name without the code
    std::string str() const;   // round-trips through parse
    bool head_trainable() const { return kind == RegimeKind::moddrop_plus || kind == RegimeKind::moddrop_plus_plus; }

    friend bool operator==(const Regime&, const Regime&) = default;
};

struct TrainConfig {
    Regime regime;
    std::size_t epochs = 60;
    std::size_t batch_size = 8;
    double lr0 = 0.01;
    std::size_t decay_start_epoch = 20;
    AdamConfig adam;
    std::uint64_t seed = 7;
    std::size_t val_every = 5;  // validation period in epochs; the last epoch is always validated
    double test_fraction = 0.2;
    double val_fraction = 0.2;
    double threshold = 0.5;

    void validate() const;
};

// lr0 before decay_start_epoch, then linear to 0 at `epochs`.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct StepReport {
    double total = 0;
    double focal_full = 0;     // NaN outside co-training
    double focal_missing = 0;
    double ssim = 0;           // NaN outside co-training
    std::vector<ModalityCode> codes;
};

// Everything a step needs besides the model and the optimizer.
struct StepContext {
    const DropoutPolicy& policy;
    const LossConfig& loss;
    double lr = 0;
    std::uint64_t seed = 0;   // per-sample code streams derive from (seed, epoch, position)
    std::uint64_t epoch = 0;
    std::uint64_t first_position = 0;
};

// Stacked per-sample tensors; modality-major input channels.
Tensor stack_input(const MultiModalSample& sample);

// Per sample: draws m_i, runs f = F_d(x | 1) and f_i = F_d(x~_i | m_i), both
// through F_s, and accumulates the combined objective divided by the batch
// size. One optimizer update per call.
StepReport co_train_step(SegmentationModel& model, Adam& optimizer, std::span<const MultiModalSample* const> batch,
                         const StepContext& ctx);

// Single-branch focal update. moddrop and independent keep the head frozen,
// moddrop_plus trains it; independent uses its fixed code for every sample.
StepReport train_step_static(SegmentationModel& model, Adam& optimizer, std::span<const MultiModalSample* const> batch,
                             const Regime& regime, const StepContext& ctx);

struct EpochLog {
    std::size_t epoch = 0;
    std::string regime;
    std::string code_mode;
    double focal_full = 0;
    double focal_missing = 0;
    double ssim = 0;
    double lr = 0;

    friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

inline constexpr const char* kTrainingLogHeader = "epoch,regime,code_mode,focal_full,focal_missing,ssim,lr";
std::string format_training_log(const std::vector<EpochLog>& log);

struct TrainSetup {
    BackboneConfig model;
    TrainConfig train;
    LossConfig loss;
    DropoutPolicy dropout;
    std::uint64_t config_hash = 0;  // recorded in checkpoints
};

struct TrainingResult {
    Checkpoint best;   // best validation DSC; the final state when nothing was validated
    Checkpoint final;
    std::vector<EpochLog> log;
    double best_val_dsc = 0;
    std::size_t best_epoch = 0;
    std::vector<std::pair<std::size_t, double>> validation;  // (epochs done, mean DSC)
};

using EpochCallback = std::function<void(const EpochLog&)>;

SegmentationModel initial_model(const BackboneConfig& config, std::uint64_t seed);

// Trains on the training part of split_subjects(n, dataset.seed, ...).
TrainingResult run_training(const Dataset& dataset, const TrainSetup& setup, const EpochCallback& on_epoch = {});

// Codes a regime is evaluated on: the fixed code for independent, else all of them.
std::vector<ModalityCode> regime_codes(const Regime& regime, std::size_t modalities);

}  // namespace moddrop
