#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "moddrop/data_synth.hpp"
#include "moddrop/evaluation.hpp"
#include "moddrop/trainer.hpp"

namespace moddrop {

// Merged run configuration. File format: one `key = value` per line, `#`
// comments, keys prefixed by section (synth., model., train., loss., drop.,
// eval.). Lists are comma separated. Unknown keys are rejected.
//
// The model's modality count and slice depth are not separate keys: they
// follow synth.modalities and synth.slices.
struct RunConfig {
    SynthConfig synth;
    std::size_t subjects = 25;
    BackboneConfig model;
    TrainConfig train;
    LossConfig loss;
    DropoutPolicy dropout;
    EvalOptions eval;

    RunConfig();

    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    // Applies one "key=value" assignment; the same keys as the file format.
    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& assignment);

    // Propagates synth.modalities / synth.slices into model and dropout,
    // then validates every part. Throws ConfigError.
    void finalize();

    // Every key with its current value, sorted; parse(canonical_text()) reproduces this config.
    std::string canonical_text() const;
    std::uint64_t hash() const;

    TrainSetup train_setup() const;

    static std::vector<std::string> keys();
};

}  // namespace moddrop
