#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "moddrop/mask.hpp"
#include "moddrop/sample.hpp"

namespace moddrop {

// Synthetic multi-modal 2.5D lesion phantom. Modality order is canonical:
// T1-like, FLAIR-like, T2-like, then a fourth (PD/CE-like) channel.
struct SynthConfig {
    std::size_t modalities = 4;
    std::size_t size = 64;    // H = W
    std::size_t slices = 3;   // odd; the label belongs to the centre slice
    std::size_t lesions_min = 2;
    std::size_t lesions_max = 5;
    double radius_min = 1.5;
    double radius_max = 4.0;
    // Lesion intensity change relative to the tissue level, per modality.
    // Empty selects the defaults, where the FLAIR-like channel dominates.
    std::vector<double> contrast;
    // Coupling of each modality to the shared smooth anatomy field.
    std::vector<double> anatomy_weight;
    double texture_scale = 3.0;       // Gaussian sigma of background fields, pixels
    double texture_amplitude = 0.12;  // modality-specific texture strength
    double noise_sigma = 0.04;        // white noise, relative to tissue level
    std::uint64_t seed = 7;

    void validate() const;
    std::vector<double> resolved_contrast() const;
    std::vector<double> resolved_anatomy_weight() const;
    // [min, max] fraction of label voxels any subject can have.
    std::pair<double, double> prevalence_bounds() const;
};

std::vector<std::string> canonical_modality_names(std::size_t k);

// Label support of the given lesions on the slice at height `z` (centre slice z = 0).
BinaryMask rasterize_lesions(const std::vector<Lesion>& lesions, std::size_t height, std::size_t width, double z);

MultiModalSample generate_subject(const SynthConfig& cfg, std::size_t subject_id);

struct Dataset {
    std::vector<std::string> modality_names;
    std::uint64_t seed = 0;
    std::vector<MultiModalSample> samples;
};

Dataset generate_dataset(const SynthConfig& cfg, std::size_t n_subjects);
bool bitwise_equal(const Dataset& a, const Dataset& b);

struct KdeBandwidth {
    enum class Rule { silverman, fixed } rule = Rule::silverman;
    double value = 0.0;  // used by Rule::fixed

    static KdeBandwidth silverman() { return {}; }
    static KdeBandwidth fixed(double h) { return {Rule::fixed, h}; }
};

inline constexpr std::size_t kKdeGridPoints = 256;

// Mode of the Gaussian KDE of the strictly positive values, searched on a
// 256-point grid spanning their range and refined by a parabola through the
// peak and its neighbours. Throws DegenerateError when the values are constant.
double kde_mode(std::span<const double> values, KdeBandwidth bandwidth = {});

// Divides the image by kde_mode so the dominant tissue peak maps to 1.
Tensor kde_normalize(const Tensor& image, KdeBandwidth bandwidth = {});

// Deterministic subject split: a seeded permutation puts test_fraction of
// the subjects in `test`; the last val_fraction of the remaining training
// subjects become `val`, the rest `train`.
struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

DatasetSplit split_subjects(std::size_t n, std::uint64_t seed, double test_fraction = 0.2, double val_fraction = 0.2);

// On-disk layout: <dir>/manifest.txt plus <dir>/subject_NNN/<modality>.mdt
// and label.mdt. Samples are narrowed to float32 at generation time, so a
// save/load round trip is exact.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace moddrop
