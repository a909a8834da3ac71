#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "moddrop/data_synth.hpp"
#include "moddrop/error.hpp"
#include "test_util.hpp"

using namespace moddrop;

namespace {

SynthConfig small_config(std::uint64_t seed = 7) {
    SynthConfig cfg;
    cfg.size = 24;
    cfg.seed = seed;
    return cfg;
}

// Rotated ellipsoid membership written out from the quadratic form.
bool ellipsoid_contains(const Lesion& l, double x, double y, double z) {
    const double c = std::cos(l.theta), s = std::sin(l.theta);
    const double a = (x - l.cx) * c + (y - l.cy) * s;
    const double b = (y - l.cy) * c - (x - l.cx) * s;
    return a * a / (l.rx * l.rx) + b * b / (l.ry * l.ry) + (z - l.cz) * (z - l.cz) / (l.rz * l.rz) <= 1.0;
}

// Brute-force KDE mode on a dense grid, fixed bandwidth, positive values only.
double dense_kde_mode(const std::vector<double>& v, double h, std::size_t points) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double best = *lo, best_density = -1;
    for (std::size_t j = 0; j < points; ++j) {
        const double g = *lo + (*hi - *lo) * static_cast<double>(j) / static_cast<double>(points - 1);
        double d = 0;
        for (double x : v) d += std::exp(-0.5 * (g - x) * (g - x) / (h * h));
        if (d > best_density) {
            best_density = d;
            best = g;
        }
    }
    return best;
}

}  // namespace

TEST_SUITE("synthetic generator") {
    TEST_CASE("same seed gives a bit-identical dataset, another seed does not") {
        const Dataset a = generate_dataset(small_config(), 3);
        const Dataset b = generate_dataset(small_config(), 3);
        CHECK(bitwise_equal(a, b));
        CHECK_FALSE(bitwise_equal(a, generate_dataset(small_config(8), 3)));
        CHECK(a.modality_names == std::vector<std::string>{"t1", "flair", "t2", "pd"});
    }

    TEST_CASE("shapes and float32 values") {
        const MultiModalSample s = generate_subject(small_config(), 0);
        CHECK(s.modality_count() == 4);
        for (const Tensor& m : s.modalities) {
            CHECK(m.shape() == Shape{3, 24, 24});
            for (double v : m.data()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
        }
        CHECK(s.label.shape == Shape{24, 24});
        CHECK(s.label_tensor().shape() == Shape{1, 1, 24, 24});
    }

    TEST_CASE("label equals the re-rasterized ellipse union") {
        for (std::size_t id = 0; id < 10; ++id) {
            const MultiModalSample s = generate_subject(small_config(11), id);
            CHECK(s.lesions.size() >= 2);
            CHECK(s.lesions.size() <= 5);
            BinaryMask oracle({24, 24});
            for (std::size_t y = 0; y < 24; ++y)
                for (std::size_t x = 0; x < 24; ++x)
                    for (const Lesion& l : s.lesions)
                        if (ellipsoid_contains(l, static_cast<double>(x), static_cast<double>(y), 0.0))
                            oracle.bits[y * 24 + x] = 1;
            CHECK(s.label == oracle);
            CHECK(rasterize_lesions(s.lesions, 24, 24, 0.0) == oracle);
            CHECK(s.label.count() > 0);
        }
    }

    TEST_CASE("zero contrast and noise leave a modality independent of the lesions") {
        SynthConfig a = small_config();
        a.noise_sigma = 0.0;
        a.contrast = {0.0, 0.9, 0.6, 0.45};
        SynthConfig b = a;
        b.radius_min = 2.5;  // different lesions, same background streams
        const MultiModalSample sa = generate_subject(a, 0);
        const MultiModalSample sb = generate_subject(b, 0);
        CHECK(sa.label != sb.label);
        CHECK(testutil::bit_equal(sa.modalities[0].data(), sb.modalities[0].data()));
        CHECK_FALSE(testutil::bit_equal(sa.modalities[1].data(), sb.modalities[1].data()));
    }

    TEST_CASE("FLAIR-like channel has the strongest default contrast") {
        const std::vector<double> c = SynthConfig{}.resolved_contrast();
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (k != 1) CHECK(std::abs(c[1]) > std::abs(c[k]));
        }
    }

    TEST_CASE("lesion prevalence within bounds over 50 seeds") {
        SynthConfig cfg;
        const auto [lo, hi] = cfg.prevalence_bounds();
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            cfg.seed = seed;
            const MultiModalSample s = generate_subject(cfg, 0);
            const double prevalence = static_cast<double>(s.label.count()) / static_cast<double>(s.label.size());
            CHECK(prevalence >= lo);
            CHECK(prevalence <= hi);
        }
    }

    TEST_CASE("invalid geometry is a config error") {
        SynthConfig cfg;
        cfg.slices = 2;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = SynthConfig{};
        cfg.lesions_min = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = SynthConfig{};
        cfg.radius_min = 5;
        cfg.radius_max = 4;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = SynthConfig{};
        cfg.size = 6;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = SynthConfig{};
        cfg.modalities = 0;
        CHECK_THROWS_AS(generate_dataset(cfg, 1), ConfigError);
        CHECK_THROWS_AS(generate_dataset(SynthConfig{}, 0), ConfigError);
    }
}

TEST_SUITE("kde normalization") {
    TEST_CASE("scale invariance") {
        Rng rng(1);
        std::vector<double> v(2000);
        for (double& x : v) x = std::max(0.0, rng.normal(5.0, 1.0));
        const Tensor image = Tensor::from({2000}, v);
        for (double factor : {3.0, 0.01, 250.0}) {
            std::vector<double> scaled = v;
            for (double& x : scaled) x *= factor;
            const Tensor a = kde_normalize(image);
            const Tensor b = kde_normalize(Tensor::from({2000}, scaled));
            CHECK(testutil::max_abs_diff(a.data(), b.data()) < 1e-9);
        }
    }

    TEST_CASE("peak at one is a fixed point") {
        Rng rng(2);
        std::vector<double> v(3000);
        for (double& x : v) x = rng.normal(1.0, 0.1);
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double step = (*hi - *lo) / static_cast<double>(kKdeGridPoints - 1);
        const double mode = kde_mode(v, KdeBandwidth::fixed(0.05));
        const double reference = dense_kde_mode(v, 0.05, 4096);
        CHECK(std::abs(mode - reference) < 0.5 * step);
        CHECK(std::abs(mode - 1.0) < 0.03);
    }

    TEST_CASE("bimodal mixture maps its taller peak to one") {
        Rng rng(3);
        std::vector<double> v;
        for (int i = 0; i < 3000; ++i) v.push_back(rng.normal(2.0, 0.15));
        for (int i = 0; i < 1200; ++i) v.push_back(rng.normal(4.0, 0.15));
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double step = (*hi - *lo) / static_cast<double>(kKdeGridPoints - 1);
        const double h = 0.08;
        const double reference = dense_kde_mode(v, h, 8192);
        CHECK(std::abs(kde_mode(v, KdeBandwidth::fixed(h)) - reference) < step);
        const Tensor out = kde_normalize(Tensor::from({v.size()}, v), KdeBandwidth::fixed(h));
        CHECK(std::abs(kde_mode(out.data(), KdeBandwidth::fixed(h / reference)) - 1.0) < step / reference);
    }

    TEST_CASE("zeros are background and constant images are degenerate") {
        std::vector<double> v(100, 0.0);
        for (std::size_t i = 0; i < 50; ++i) v[i] = 2.0 + 0.01 * static_cast<double>(i % 5);
        CHECK(kde_mode(v) > 1.9);
        CHECK_THROWS_AS(kde_mode(std::vector<double>(10, 3.0)), DegenerateError);
        CHECK_THROWS_AS(kde_mode(std::vector<double>{0.0, 0.0, 1.0}), DegenerateError);
    }
}

TEST_SUITE("dataset split and persistence") {
    TEST_CASE("split sizes, disjointness and determinism") {
        const DatasetSplit s = split_subjects(25, 7);
        CHECK(s.test.size() == 5);
        CHECK(s.val.size() == 4);
        CHECK(s.train.size() == 16);
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        all.insert(s.val.begin(), s.val.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == 25);
        CHECK(*all.rbegin() == 24);
        const DatasetSplit again = split_subjects(25, 7);
        CHECK(again.test == s.test);
        CHECK(again.train == s.train);
        CHECK(split_subjects(25, 8).test != s.test);
        CHECK_THROWS_AS(split_subjects(10, 1, 1.0, 0.2), ConfigError);
    }

    TEST_CASE("save then load is bitwise equal, and files are stable") {
        testutil::TempDir dir("dataset");
        const Dataset ds = generate_dataset(small_config(), 3);
        save_dataset(dir.path(), ds);
        const Dataset back = load_dataset(dir.path());
        CHECK(bitwise_equal(ds, back));
        for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(ds.samples[i].lesions == back.samples[i].lesions);
        testutil::TempDir again("dataset_again");
        save_dataset(again.path(), back);
        CHECK(testutil::read_bytes(dir / "manifest.txt") == testutil::read_bytes(again / "manifest.txt"));
        CHECK(testutil::read_bytes(dir.path() / "subject_001" / "flair.mdt") ==
              testutil::read_bytes(again.path() / "subject_001" / "flair.mdt"));
    }

    TEST_CASE("permuted manifest modality order loads in canonical order") {
        testutil::TempDir dir("dataset_perm");
        const Dataset ds = generate_dataset(small_config(), 2);
        save_dataset(dir.path(), ds);
        std::string manifest = testutil::read_bytes(dir / "manifest.txt");
        const std::string listed = "modalities=t1,flair,t2,pd";
        REQUIRE(manifest.find(listed) != std::string::npos);
        manifest.replace(manifest.find(listed), listed.size(), "modalities=pd,t2,t1,flair");
        testutil::write_bytes(dir / "manifest.txt", manifest);
        const Dataset back = load_dataset(dir.path());
        CHECK(back.modality_names == ds.modality_names);
        CHECK(bitwise_equal(ds, back));
    }

    TEST_CASE("corrupt datasets raise typed errors") {
        testutil::TempDir dir("dataset_bad");
        save_dataset(dir.path(), generate_dataset(small_config(), 2));
        const auto flair = dir.path() / "subject_000" / "flair.mdt";
        const std::string bytes = testutil::read_bytes(flair);
        testutil::write_bytes(flair, bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(load_dataset(dir.path()), FormatError);

        testutil::write_bytes(flair, "JUNK" + bytes.substr(4));
        CHECK_THROWS_AS(load_dataset(dir.path()), FormatError);
        testutil::write_bytes(flair, bytes);
        CHECK_NOTHROW(load_dataset(dir.path()));

        std::string manifest = testutil::read_bytes(dir / "manifest.txt");
        testutil::write_bytes(dir / "manifest.txt", manifest + "garbage line\n");
        CHECK_THROWS_AS(load_dataset(dir.path()), FormatError);
        const std::string listed = "modalities=t1,flair,t2,pd";
        manifest.replace(manifest.find(listed), listed.size(), "modalities=t1,flair,t2,xx");
        testutil::write_bytes(dir / "manifest.txt", manifest);
        CHECK_THROWS_AS(load_dataset(dir.path()), FormatError);

        std::filesystem::remove(dir / "manifest.txt");
        CHECK_THROWS_AS(load_dataset(dir.path()), IoError);
    }
}
