#include "moddrop/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "moddrop/error.hpp"
#include "moddrop/ops.hpp"
#include "moddrop/rng.hpp"
#include "moddrop/tensor_io.hpp"

namespace moddrop {

namespace {

// Raw scanner-like tissue levels; KDE normalization maps each back to ~1.
constexpr double kTissueLevel[] = {420.0, 260.0, 610.0, 350.0};
constexpr double kDefaultContrast[] = {-0.45, 0.90, 0.60, 0.45};
constexpr double kDefaultAnatomy[] = {0.25, -0.18, -0.30, -0.20};

double tissue_level(std::size_t k) { return k < 4 ? kTissueLevel[k] : 300.0 + 40.0 * static_cast<double>(k); }

// Smooth zero-mean unit-variance random field over [slices, size, size],
// correlated across slices through a shared in-plane component.
std::vector<double> smooth_field(Rng rng, std::size_t slices, std::size_t size, double sigma) {
    const std::size_t plane = size * size;
    std::vector<double> shared(plane);
    for (double& v : shared) v = rng.normal();
    std::vector<double> field(slices * plane);
    for (std::size_t s = 0; s < slices; ++s) {
        for (std::size_t i = 0; i < plane; ++i) field[s * plane + i] = shared[i] + 0.5 * rng.normal();
    }
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    radius = std::min(radius, static_cast<int>(size) - 1);
    if (radius > 0) {
        const std::vector<double> taps = gaussian_kernel_1d(2 * radius + 1, sigma);
        std::vector<double> blurred(field.size());
        detail::gaussian_filter_forward(field.data(), blurred.data(), slices, size, size, taps);
        field.swap(blurred);
    }
    const double n = static_cast<double>(field.size());
    const double mean = std::accumulate(field.begin(), field.end(), 0.0) / n;
    double var = 0.0;
    for (double v : field) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    for (double& v : field) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    return field;
}

bool inside(const Lesion& l, double x, double y, double z) {
    const double dx = x - l.cx;
    const double dy = y - l.cy;
    const double c = std::cos(l.theta);
    const double s = std::sin(l.theta);
    const double u = (dx * c + dy * s) / l.rx;
    const double v = (-dx * s + dy * c) / l.ry;
    const double w = (z - l.cz) / l.rz;
    return u * u + v * v + w * w <= 1.0;
}

}  // namespace

void SynthConfig::validate() const {
    if (modalities < 1 || modalities > 16) {
        throw ConfigError("synth.modalities must be in [1, 16]");
    }
    if (slices == 0 || slices % 2 == 0) {
        throw ConfigError("synth.slices must be odd so a centre slice exists");
    }
    if (lesions_min < 1 || lesions_max < lesions_min) {
        throw ConfigError("synth lesion count range must satisfy 1 <= min <= max");
    }
    if (!(radius_min > 0.0) || radius_max < radius_min) {
        throw ConfigError("synth lesion radius range must satisfy 0 < min <= max");
    }
    const auto margin = static_cast<std::size_t>(std::ceil(radius_max));
    if (size < 2 * margin + 1 || size < 4) {
        throw ConfigError("synth.size " + std::to_string(size) + " too small for lesions of radius " +
                          std::to_string(radius_max));
    }
    if (!contrast.empty() && contrast.size() != modalities) {
        throw ConfigError("synth.contrast needs one value per modality");
    }
    if (!anatomy_weight.empty() && anatomy_weight.size() != modalities) {
        throw ConfigError("synth.anatomy_weight needs one value per modality");
    }
    if (texture_scale < 0.0 || texture_amplitude < 0.0 || noise_sigma < 0.0) {
        throw ConfigError("synth texture and noise parameters must be non-negative");
    }
}

std::vector<double> SynthConfig::resolved_contrast() const {
    if (!contrast.empty()) return contrast;
    std::vector<double> out;
    for (std::size_t k = 0; k < modalities; ++k) out.push_back(k < 4 ? kDefaultContrast[k] : 0.2);
    return out;
}

std::vector<double> SynthConfig::resolved_anatomy_weight() const {
    if (!anatomy_weight.empty()) return anatomy_weight;
    std::vector<double> out;
    for (std::size_t k = 0; k < modalities; ++k) out.push_back(k < 4 ? kDefaultAnatomy[k] : -0.1);
    return out;
}

std::pair<double, double> SynthConfig::prevalence_bounds() const {
    const double pixels = static_cast<double>(size * size);
    const double largest = std::numbers::pi * (radius_max + 1.0) * (radius_max + 1.0);
    return {1.0 / pixels, std::min(1.0, static_cast<double>(lesions_max) * largest / pixels)};
}

std::vector<std::string> canonical_modality_names(std::size_t k) {
    static const char* kNames[] = {"t1", "flair", "t2", "pd"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(i < 4 ? kNames[i] : "m" + std::to_string(i));
    return out;
}

BinaryMask rasterize_lesions(const std::vector<Lesion>& lesions, std::size_t height, std::size_t width, double z) {
    BinaryMask mask({height, width});
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (const Lesion& l : lesions) {
                if (inside(l, static_cast<double>(x), static_cast<double>(y), z)) {
                    mask.bits[y * width + x] = 1;
                    break;
                }
            }
        }
    }
    return mask;
}

MultiModalSample generate_subject(const SynthConfig& cfg, std::size_t subject_id) {
    cfg.validate();
    const std::size_t k = cfg.modalities;
    const std::size_t n = cfg.size;
    const std::size_t s = cfg.slices;
    const std::size_t plane = n * n;
    const Rng root(derive_seed(cfg.seed, subject_id));

    MultiModalSample sample;
    sample.subject_id = subject_id;
    sample.seed = root.seed();

    Rng lesion_rng = root.split(2);
    const std::size_t count = cfg.lesions_min + lesion_rng.below(cfg.lesions_max - cfg.lesions_min + 1);
    const auto margin = static_cast<std::uint64_t>(std::ceil(cfg.radius_max));
    for (std::size_t i = 0; i < count; ++i) {
        Lesion l;
        // Integer centres near z = 0 put every centre pixel inside its lesion on the labelled slice.
        l.cx = static_cast<double>(margin + lesion_rng.below(n - 2 * margin));
        l.cy = static_cast<double>(margin + lesion_rng.below(n - 2 * margin));
        l.cz = lesion_rng.uniform(-0.5, 0.5);
        l.rx = lesion_rng.uniform(cfg.radius_min, cfg.radius_max);
        l.ry = lesion_rng.uniform(cfg.radius_min, cfg.radius_max);
        l.rz = lesion_rng.uniform(1.0, 2.0);
        l.theta = lesion_rng.uniform(0.0, std::numbers::pi);
        sample.lesions.push_back(l);
    }
    std::vector<BinaryMask> support;
    for (std::size_t z = 0; z < s; ++z) {
        support.push_back(rasterize_lesions(sample.lesions, n, n, static_cast<double>(z) - static_cast<double>(s / 2)));
    }
    sample.label = support[s / 2];

    const std::vector<double> anatomy = smooth_field(root.split(1), s, n, cfg.texture_scale);
    const std::vector<double> contrast = cfg.resolved_contrast();
    const std::vector<double> coupling = cfg.resolved_anatomy_weight();
    for (std::size_t m = 0; m < k; ++m) {
        const std::vector<double> texture = smooth_field(root.split(10 + m), s, n, cfg.texture_scale);
        Rng noise = root.split(100 + m);
        const double level = tissue_level(m);
        std::vector<double> img(s * plane);
        for (std::size_t z = 0; z < s; ++z) {
            for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t at = z * plane + i;
                double v = 1.0 + coupling[m] * anatomy[at] + cfg.texture_amplitude * texture[at];
                if (support[z].bits[i]) v += contrast[m];
                v += cfg.noise_sigma * noise.normal();
                img[at] = std::max(0.0, level * v);
            }
        }
        Tensor stack = kde_normalize(Tensor::from({s, n, n}, std::move(img)));
        narrow_to_float(stack);
        sample.modalities.push_back(std::move(stack));
    }
    return sample;
}

Dataset generate_dataset(const SynthConfig& cfg, std::size_t n_subjects) {
    if (n_subjects < 1) {
        throw ConfigError("dataset needs at least one subject");
    }
    Dataset ds;
    ds.modality_names = canonical_modality_names(cfg.modalities);
    ds.seed = cfg.seed;
    for (std::size_t i = 0; i < n_subjects; ++i) {
        ds.samples.push_back(generate_subject(cfg, i));
    }
    return ds;
}

bool bitwise_equal(const Dataset& a, const Dataset& b) {
    if (a.modality_names != b.modality_names || a.seed != b.seed || a.samples.size() != b.samples.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        if (!bitwise_equal(a.samples[i], b.samples[i])) return false;
    }
    return true;
}

double kde_mode(std::span<const double> values, KdeBandwidth bandwidth) {
    std::vector<double> fg;
    for (double v : values) {
        if (v > 0.0) fg.push_back(v);
    }
    if (fg.size() < 2) {
        throw DegenerateError("KDE normalization needs at least two positive intensities");
    }
    const auto [lo_it, hi_it] = std::minmax_element(fg.begin(), fg.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) {
        throw DegenerateError("KDE normalization of a constant image");
    }
    double h = bandwidth.value;
    if (bandwidth.rule == KdeBandwidth::Rule::silverman) {
        const double n = static_cast<double>(fg.size());
        const double mean = std::accumulate(fg.begin(), fg.end(), 0.0) / n;
        double var = 0.0;
        for (double v : fg) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / (n - 1.0));
        std::vector<double> sorted = fg;
        std::sort(sorted.begin(), sorted.end());
        const auto quantile = [&](double q) {
            const double pos = q * (n - 1.0);
            const auto i = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(i);
            return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
        };
        const double iqr = quantile(0.75) - quantile(0.25);
        const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
        h = 0.9 * spread * std::pow(n, -0.2);
    }
    if (!(h > 0.0)) {
        throw DegenerateError("KDE bandwidth is not positive");
    }
    const double step = (hi - lo) / static_cast<double>(kKdeGridPoints - 1);
    std::vector<double> density(kKdeGridPoints, 0.0);
    const double inv_h = 1.0 / h;
    for (std::size_t j = 0; j < kKdeGridPoints; ++j) {
        const double g = lo + step * static_cast<double>(j);
        double acc = 0.0;
        for (double v : fg) {
            const double t = (g - v) * inv_h;
            acc += std::exp(-0.5 * t * t);
        }
        density[j] = acc;
    }
    const auto peak = static_cast<std::size_t>(std::max_element(density.begin(), density.end()) - density.begin());
    double offset = 0.0;
    if (peak > 0 && peak + 1 < kKdeGridPoints) {
        const double a = density[peak - 1];
        const double b = density[peak];
        const double c = density[peak + 1];
        const double curvature = a - 2.0 * b + c;
        if (curvature < 0.0) offset = 0.5 * (a - c) / curvature;
    }
    return lo + step * (static_cast<double>(peak) + offset);
}

Tensor kde_normalize(const Tensor& image, KdeBandwidth bandwidth) {
    const double mode = kde_mode(image.data(), bandwidth);
    std::vector<double> out(image.data().begin(), image.data().end());
    for (double& v : out) v /= mode;
    return Tensor::from(image.shape(), std::move(out));
}

DatasetSplit split_subjects(std::size_t n, std::uint64_t seed, double test_fraction, double val_fraction) {
    if (test_fraction < 0.0 || test_fraction >= 1.0 || val_fraction < 0.0 || val_fraction >= 1.0) {
        throw ConfigError("split fractions must lie in [0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5B117ULL));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    DatasetSplit split;
    split.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
    std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(train.size()) * val_fraction));
    split.val.assign(train.end() - static_cast<std::ptrdiff_t>(n_val), train.end());
    split.train.assign(train.begin(), train.end() - static_cast<std::ptrdiff_t>(n_val));
    return split;
}

namespace {

std::string subject_dir_name(std::size_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "subject_%03zu", id);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, sep)) out.push_back(item);
    return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
    }
    if (dataset.samples.empty()) {
        throw ConfigError("refusing to save an empty dataset");
    }
    const MultiModalSample& first = dataset.samples.front();
    std::ostringstream manifest;
    manifest << "format=moddrop-dataset-1\n";
    manifest << "modalities=";
    for (std::size_t i = 0; i < dataset.modality_names.size(); ++i) {
        manifest << (i ? "," : "") << dataset.modality_names[i];
    }
    manifest << "\nslices=" << first.slices() << "\nheight=" << first.height() << "\nwidth=" << first.width()
             << "\nseed=" << dataset.seed << "\nsubjects=" << dataset.samples.size() << "\n";
    for (const MultiModalSample& s : dataset.samples) {
        const std::string key = "subject." + std::to_string(s.subject_id);
        const std::string sub = subject_dir_name(s.subject_id);
        std::filesystem::create_directories(dir / sub, ec);
        if (ec) {
            throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
        }
        manifest << key << ".dir=" << sub << "\n" << key << ".seed=" << s.seed << "\n";
        manifest << key << ".files=";
        for (std::size_t m = 0; m < s.modalities.size(); ++m) {
            const std::string file = dataset.modality_names.at(m) + ".mdt";
            save_tensor(dir / sub / file, s.modalities[m]);
            manifest << file << ",";
        }
        manifest << "label.mdt\n";
        save_tensor(dir / sub / "label.mdt", mask_to_tensor(s.label, s.label.shape));
        for (std::size_t i = 0; i < s.lesions.size(); ++i) {
            const Lesion& l = s.lesions[i];
            manifest << key << ".lesion." << i << "=" << format_double(l.cx) << "," << format_double(l.cy) << ","
                     << format_double(l.cz) << "," << format_double(l.rx) << "," << format_double(l.ry) << ","
                     << format_double(l.rz) << "," << format_double(l.theta) << "\n";
        }
    }
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (dir / "manifest.txt").string());
    }
    out << manifest.str();
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.txt";
    std::ifstream in(manifest_path);
    if (!in) {
        throw IoError("cannot open dataset manifest " + manifest_path.string());
    }
    std::map<std::string, std::string> kv;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::uint64_t line_at = offset;
        offset += line.size() + 1;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(manifest_path.string() + ": manifest line without '='", line_at);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw FormatError(manifest_path.string() + ": manifest lacks key '" + key + "'", offset);
        }
        return it->second;
    };
    const auto to_u64 = [&](const std::string& key) {
        try {
            return static_cast<std::uint64_t>(std::stoull(get(key)));
        } catch (const std::logic_error&) {
            throw FormatError(manifest_path.string() + ": key '" + key + "' is not an integer", offset);
        }
    };

    Dataset ds;
    const std::vector<std::string> listed = split_list(get("modalities"), ',');
    ds.modality_names = canonical_modality_names(listed.size());
    for (const std::string& name : listed) {
        if (std::find(ds.modality_names.begin(), ds.modality_names.end(), name) == ds.modality_names.end()) {
            throw FormatError(manifest_path.string() + ": unknown modality '" + name + "'", offset);
        }
    }
    ds.seed = to_u64("seed");
    const std::size_t slices = to_u64("slices");
    const std::size_t height = to_u64("height");
    const std::size_t width = to_u64("width");
    const std::size_t count = to_u64("subjects");

    // Subject ids are whatever keys appear; keep them in ascending order.
    std::vector<std::size_t> ids;
    for (const auto& [key, value] : kv) {
        if (key.rfind("subject.", 0) == 0 && key.size() > 4 && key.substr(key.size() - 4) == ".dir") {
            ids.push_back(std::stoull(key.substr(8, key.size() - 12)));
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.size() != count) {
        throw FormatError(manifest_path.string() + ": manifest lists " + std::to_string(ids.size()) +
                              " subject directories but declares " + std::to_string(count),
                          offset);
    }
    for (std::size_t id : ids) {
        const std::string key = "subject." + std::to_string(id);
        MultiModalSample s;
        s.subject_id = id;
        s.seed = to_u64(key + ".seed");
        const auto sub = dir / get(key + ".dir");
        for (const std::string& name : ds.modality_names) {
            Tensor t = load_tensor(sub / (name + ".mdt"));
            if (t.shape() != Shape{slices, height, width}) {
                throw FormatError((sub / (name + ".mdt")).string() + ": shape " + shape_str(t.shape()) +
                                      " disagrees with manifest",
                                  5);
            }
            s.modalities.push_back(std::move(t));
        }
        const Tensor label = load_tensor(sub / "label.mdt");
        if (label.shape() != Shape{height, width}) {
            throw FormatError((sub / "label.mdt").string() + ": label shape " + shape_str(label.shape()) +
                                  " disagrees with manifest",
                              5);
        }
        s.label = threshold_mask(label, 0.5);
        for (std::size_t i = 0;; ++i) {
            auto it = kv.find(key + ".lesion." + std::to_string(i));
            if (it == kv.end()) break;
            const std::vector<std::string> parts = split_list(it->second, ',');
            if (parts.size() != 7) {
                throw FormatError(manifest_path.string() + ": lesion entry needs 7 values", offset);
            }
            Lesion l;
            double* fields[] = {&l.cx, &l.cy, &l.cz, &l.rx, &l.ry, &l.rz, &l.theta};
            for (std::size_t f = 0; f < 7; ++f) *fields[f] = std::stod(parts[f]);
            s.lesions.push_back(l);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace moddrop
