#include <doctest.h>

#include <cmath>

#include "moddrop/error.hpp"
#include "moddrop/metrics.hpp"
#include "moddrop/rng.hpp"
#include "oracles.hpp"

using namespace moddrop;

namespace {

BinaryMask mask_from(Shape shape, std::initializer_list<std::size_t> on) {
    BinaryMask m(std::move(shape));
    for (std::size_t i : on) m.bits[i] = 1;
    return m;
}

// Independent Bernoulli voxels; at these densities components of many
// sizes and diagonal-only contacts are common.
BinaryMask random_mask(Shape shape, Rng& rng, double density) {
    BinaryMask m(std::move(shape));
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    return m;
}

}  // namespace

TEST_SUITE("voxel metrics") {
    TEST_CASE("hand-counted example") {
        // pred 6 voxels, gt 4 voxels, overlap 3.
        const BinaryMask pred = mask_from({4, 4}, {0, 1, 2, 3, 4, 5});
        const BinaryMask gt = mask_from({4, 4}, {1, 2, 3, 15});
        const VoxelMetrics m = voxel_metrics(pred, gt);
        CHECK(m.dsc == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(m.ppv == 0.5);
        CHECK(m.tpr == 0.75);
        CHECK(m.vd == 0.5);
    }

    TEST_CASE("empty-set conventions") {
        const BinaryMask empty({3, 3});
        const BinaryMask some = mask_from({3, 3}, {4});
        VoxelMetrics m = voxel_metrics(empty, empty);
        CHECK((m.dsc == 1 && m.ppv == 1 && m.tpr == 1 && m.vd == 0));
        m = voxel_metrics(empty, some);
        CHECK((m.dsc == 0 && m.ppv == 1 && m.tpr == 0));
        m = voxel_metrics(some, empty);
        CHECK((m.dsc == 0 && m.tpr == 1 && std::isnan(m.vd)));
        CHECK_THROWS_AS(voxel_metrics(empty, BinaryMask({3, 4})), ShapeError);
    }
}

TEST_SUITE("lesion metrics") {
    TEST_CASE("components match the flood-fill oracle") {
        Rng rng(1);
        for (int trial = 0; trial < 100; ++trial) {
            const Shape shape = trial % 2 ? Shape{16, 16} : Shape{8, 8, 8};
            const BinaryMask m = random_mask(shape, rng, 0.15 + 0.2 * rng.uniform());
            const Components c = connected_components(m, default_connectivity(m));
            const oracle::Labelling o = oracle::flood_fill(m.bits, shape);
            CHECK(c.count == static_cast<std::size_t>(o.count));
            CHECK(c.labels == o.labels);
            std::size_t total = 0;
            for (std::size_t s : c.sizes) total += s;
            CHECK(total == m.count());
        }
    }

    TEST_CASE("diagonal neighbours join; connectivity must match the mask rank") {
        const BinaryMask diag = mask_from({3, 3}, {0, 4, 8});
        CHECK(connected_components(diag, Connectivity::planar8).count == 1);
        const BinaryMask stacked = mask_from({2, 2, 2}, {0, 7});
        CHECK(connected_components(stacked, Connectivity::volumetric26).count == 1);
        CHECK_THROWS_AS(connected_components(stacked, Connectivity::planar8), ConfigError);
        CHECK_THROWS_AS(connected_components(diag, Connectivity::volumetric26), ConfigError);
    }

    TEST_CASE("two gt lesions, three predicted, one match") {
        // gt lesions at columns 0 and 4 of row 0; predictions at (0,0), (2,2), (4,4) of a 5x5 grid.
        const BinaryMask gt = mask_from({5, 5}, {0, 4});
        const BinaryMask pred = mask_from({5, 5}, {0, 12, 24});
        const LesionMetrics m = lesion_metrics(pred, gt, Connectivity::planar8);
        CHECK(m.ltpr == 0.5);
        CHECK(m.lfpr == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    }

    TEST_CASE("perfect match and empty conventions") {
        const BinaryMask gt = mask_from({4, 4}, {0, 1, 10});
        LesionMetrics m = lesion_metrics(gt, gt, Connectivity::planar8);
        CHECK((m.ltpr == 1 && m.lfpr == 0));
        m = lesion_metrics(BinaryMask({4, 4}), gt, Connectivity::planar8);
        CHECK((m.ltpr == 0 && m.lfpr == 0));
        m = lesion_metrics(BinaryMask({4, 4}), BinaryMask({4, 4}), Connectivity::planar8);
        CHECK((m.ltpr == 1 && m.lfpr == 0));
    }

    TEST_CASE("minimum overlap threshold") {
        const BinaryMask gt = mask_from({4, 4}, {0, 1, 2, 3});
        const BinaryMask pred = mask_from({4, 4}, {0});
        CHECK(lesion_metrics(pred, gt, Connectivity::planar8, 1).ltpr == 1.0);
        CHECK(lesion_metrics(pred, gt, Connectivity::planar8, 2).ltpr == 0.0);
    }
}

TEST_SUITE("metric oracles on random masks") {
    TEST_CASE("all voxel and lesion metrics agree exactly") {
        Rng rng(2);
        for (int trial = 0; trial < 500; ++trial) {
            const Shape shape = trial % 2 ? Shape{16, 16} : Shape{8, 8, 8};
            const double density = 0.02 + 0.3 * rng.uniform();
            const BinaryMask pred = random_mask(shape, rng, density);
            const BinaryMask gt = random_mask(shape, rng, density);
            const oracle::Metrics o = oracle::mask_metrics(pred.bits, gt.bits, shape);
            const VoxelMetrics v = voxel_metrics(pred, gt);
            const LesionMetrics l = lesion_metrics(pred, gt, default_connectivity(pred));
            CHECK(v.dsc == o.dsc);
            CHECK(v.ppv == o.ppv);
            CHECK(v.tpr == o.tpr);
            CHECK((v.vd == o.vd || (std::isnan(v.vd) && std::isnan(o.vd))));
            CHECK(l.ltpr == o.ltpr);
            CHECK(l.lfpr == o.lfpr);
        }
    }

    TEST_CASE("volume correlation matches the covariance form") {
        Rng rng(3);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> a(3 + trial % 10), b(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                a[i] = std::floor(rng.uniform(0, 200));
                b[i] = a[i] * rng.uniform(0.5, 1.5) + rng.uniform(-20, 20);
            }
            CHECK(std::abs(volume_correlation(a, b) - oracle::pearson(a, b)) < 1e-12);
        }
        const std::vector<double> flat{3, 3, 3}, other{1, 2, 3};
        CHECK_THROWS_AS(volume_correlation(flat, other), DegenerateError);
    }
}

TEST_SUITE("overall score") {
    TEST_CASE("hand-computed values") {
        MetricsReport r;
        r.dsc = 1, r.ppv = 1, r.lfpr = 0, r.ltpr = 1, r.corr = 1;
        CHECK(overall_score(r) == 1.0);
        r.dsc = 0, r.ppv = 0, r.lfpr = 1, r.ltpr = 0, r.corr = 0;
        CHECK(overall_score(r) == 0.0);
        r.dsc = 0.704, r.ppv = 0.8, r.lfpr = 0.2, r.ltpr = 0.7, r.corr = 0.9;
        CHECK(std::abs(overall_score(r) - 0.788) < 1e-12);
        r.corr = std::nan("");
        CHECK_THROWS_AS(overall_score(r), ConfigError);
    }

    TEST_CASE("monotone in each component") {
        Rng rng(4);
        for (int trial = 0; trial < 200; ++trial) {
            MetricsReport r;
            r.dsc = rng.uniform(), r.ppv = rng.uniform(), r.lfpr = rng.uniform(), r.ltpr = rng.uniform();
            r.corr = rng.uniform(-1, 1);
            const double base = overall_score(r);
            CHECK(std::abs(base - oracle::overall_score(r.dsc, r.ppv, r.lfpr, r.ltpr, r.corr)) < 1e-12);
            MetricsReport up = r;
            up.dsc += 0.01;
            CHECK(overall_score(up) > base);
            up = r;
            up.ppv += 0.01;
            CHECK(overall_score(up) > base);
            up = r;
            up.ltpr += 0.01;
            CHECK(overall_score(up) > base);
            up = r;
            up.corr += 0.01;
            CHECK(overall_score(up) > base);
            up = r;
            up.lfpr += 0.01;
            CHECK(overall_score(up) < base);
        }
    }
}

TEST_SUITE("aggregate") {
    TEST_CASE("means, correlation, score and ranges") {
        Rng rng(5);
        std::vector<SubjectMetrics> rows;
        std::vector<double> pv, gv;
        for (std::size_t s = 0; s < 6; ++s) {
            const BinaryMask pred = random_mask({16, 16}, rng, 0.05 + 0.05 * static_cast<double>(s));
            const BinaryMask gt = random_mask({16, 16}, rng, 0.05 + 0.04 * static_cast<double>(s));
            rows.push_back(subject_metrics(pred, gt, Connectivity::planar8));
            rows.back().subject_id = s;
            pv.push_back(static_cast<double>(pred.count()));
            gv.push_back(static_cast<double>(gt.count()));
        }
        const MetricsReport r = aggregate(rows);
        double dsc = 0;
        for (const auto& row : rows) dsc += row.dsc / 6.0;
        CHECK(r.dsc == doctest::Approx(dsc).epsilon(1e-14));
        CHECK(std::abs(r.corr - oracle::pearson(pv, gv)) < 1e-12);
        CHECK(r.sc == doctest::Approx(overall_score(r)).epsilon(1e-15));
        for (double v : {r.dsc, r.ppv, r.tpr, r.lfpr, r.ltpr}) CHECK((v >= 0 && v <= 1));
        CHECK((r.corr >= -1 && r.corr <= 1));
    }

    TEST_CASE("degenerate correlation is reported, not fatal") {
        std::vector<SubjectMetrics> rows(3);
        for (auto& row : rows) {
            row.dsc = row.ppv = row.tpr = row.ltpr = 1;
            row.gt_volume = row.pred_volume = 5;
        }
        const MetricsReport r = aggregate(rows);
        CHECK(std::isnan(r.corr));
        CHECK_FALSE(r.warnings.empty());
        CHECK(r.sc == doctest::Approx(0.75));
    }
}
