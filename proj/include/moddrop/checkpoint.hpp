#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "moddrop/backbone.hpp"
#include "moddrop/modality_code.hpp"

namespace moddrop {

// Named tensor table plus run metadata.
//
// On disk (MDC1): "MDC1" | u32 LE entry count | per entry: u16 LE name
// length, UTF-8 name, MDT1 tensor payload. Metadata is stored as entries
// under "meta.*"; 64-bit integers are split into four 16-bit limbs so they
// survive float32 storage exactly.
struct Checkpoint {
    std::vector<NamedTensor> tensors;  // parameters and optimizer moments
    std::uint64_t epoch = 0;
    std::uint64_t optimizer_steps = 0;
    std::uint64_t rng_seed = 0;
    std::uint64_t rng_counter = 0;
    std::uint64_t config_hash = 0;
    BackboneConfig model;
    std::string regime;
    std::optional<ModalityCode> fixed_code;  // set for independent models

    const Tensor* find(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Model parameters copied out of / into a checkpoint by name.
Checkpoint snapshot_parameters(const SegmentationModel& model);
SegmentationModel model_from_checkpoint(const Checkpoint& ckpt);
void load_parameters(SegmentationModel& model, const Checkpoint& ckpt);

// FNV-1a over raw bytes; used for config and file fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xCBF29CE484222325ULL);
std::uint64_t fnv1a(const std::string& text);
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace moddrop
