#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pmgeo/losses.hpp"
#include "pmgeo/random.hpp"
#include "pmgeo/synth.hpp"

using namespace pmgeo;

namespace {

RenderResult small_scene(uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.width = 32;
    spec.height = 32;
    spec.focal_px = 32.0;
    spec.background_depth = 8.0;
    Primitive s;
    s.kind = Primitive::Kind::sphere;
    s.center = Vec3{-0.5, 0.2, 4.0};
    s.radius = 1.0;
    Primitive b;
    b.kind = Primitive::Kind::box;
    b.center = Vec3{1.0, -0.5, 5.5};
    b.size = Vec3{1.2, 1.5, 0.8};
    spec.primitives = {s, b};
    return render(spec);
}

}  // namespace

TEST_CASE("loss_global is zero for identical maps and affine-invariant") {
    RenderResult scene = small_scene(1);
    LossReport same = loss_global(scene.points, scene.points, scene.mask);
    CHECK(same.value <= 1e-12);

    // pred = (gt - t)/s reproduces gt under the solved alignment
    PointMap pred = scene.points;
    double s = 2.3;
    Vec3 t{0.7, -0.4, 1.1};
    for (auto& p : pred.points) p = (p - t) / s;
    LossReport aligned = loss_global(pred, scene.points, scene.mask);
    CHECK(aligned.value <= 1e-9);
    CHECK(aligned.alignment.scale == doctest::Approx(s).epsilon(1e-6));
}

TEST_CASE("loss_global equals an independent recomputation at the oracle optimum") {
    SplitMix64 rng(42);
    int n = 100;
    PointMap pred(n, 1), gt(n, 1);
    ValidMask mask(n, 1, true);
    for (int i = 0; i < n; ++i) {
        Vec3 p{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(1, 8)};
        Vec3 q = 1.7 * p + Vec3{0.3, -0.6, 0.9};
        q.x += 0.05 * rng.normal();
        q.y += 0.05 * rng.normal();
        q.z += 0.05 * rng.normal();
        pred.points[i] = p;
        gt.points[i] = Vec3{q.x, q.y, std::max(0.2, q.z)};
    }
    LossReport report = loss_global(pred, gt, mask);

    std::array<std::vector<double>, 3> sx, sy;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) w.push_back(1.0 / gt.points[i].z);
    std::vector<AxisSeries> axes;
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < n; ++i) {
            sx[k].push_back(pred.points[i][k]);
            sy[k].push_back(gt.points[i][k]);
        }
        axes.push_back(AxisSeries{sx[k], sy[k], w});
    }
    std::vector<double> b(3);
    double a = oracles::scale_shift(axes, &b);
    double recomputed = oracles::objective_l1(axes, a, b);
    CHECK(std::fabs(report.value - recomputed) / recomputed <= 1e-8);
}

TEST_CASE("sphere region sampling matches the linear-scan oracle") {
    RenderResult scene = small_scene(2);
    std::vector<int> valid;
    for (int i = 0; i < scene.mask.size(); ++i)
        if (scene.mask.at(i)) valid.push_back(i);

    SplitMix64 rng(3);
    std::vector<RegionSeed> seeds;
    for (int k = 0; k < 10; ++k) {
        int c = valid[rng.uniform_index(valid.size())];
        seeds.push_back(RegionSeed{c, rng.uniform(0.2, 4.0)});
    }
    std::vector<SphereRegion> regions = sample_sphere_regions(scene.points, scene.mask, seeds);
    for (size_t k = 0; k < seeds.size(); ++k) {
        std::vector<int> want = oracles::region_members(scene.points, scene.mask,
                                                        seeds[k].center_index, seeds[k].radius);
        CHECK(regions[k].members == want);
    }
}

TEST_CASE("region edge cases: singleton, whole mask, bad center") {
    RenderResult scene = small_scene(3);
    std::vector<int> valid;
    for (int i = 0; i < scene.mask.size(); ++i)
        if (scene.mask.at(i)) valid.push_back(i);
    int c = valid[valid.size() / 2];

    std::vector<RegionSeed> tiny{RegionSeed{c, 1e-9}};
    auto r1 = sample_sphere_regions(scene.points, scene.mask, tiny);
    CHECK(r1[0].members == std::vector<int>{c});

    double huge = 2.0 * bounding_sphere_radius(scene.points, scene.mask) + 1.0;
    std::vector<RegionSeed> all{RegionSeed{c, huge}};
    auto r2 = sample_sphere_regions(scene.points, scene.mask, all);
    CHECK(int(r2[0].members.size()) == scene.mask.count());

    ValidMask masked = scene.mask;
    masked.set(c, false);
    std::vector<RegionSeed> bad{RegionSeed{c, 1.0}};
    CHECK_THROWS_AS(sample_sphere_regions(scene.points, masked, bad), Error);
}

TEST_CASE("multiscale loss: reductions and per-region invariance") {
    RenderResult scene = small_scene(4);
    SplitMix64 rng(5);
    PointMap noisy = scene.points;
    for (auto& p : noisy.points) {
        p.x += 0.02 * rng.normal();
        p.y += 0.02 * rng.normal();
        p.z += 0.02 * rng.normal();
    }

    int c = -1;
    for (int i = 0; i < scene.mask.size(); ++i)
        if (scene.mask.at(i)) {
            c = i;
            break;
        }
    std::vector<RegionSeed> full{RegionSeed{c, 100.0}};
    auto regions = sample_sphere_regions(scene.points, scene.mask, full);

    CHECK(loss_multiscale(scene.points, scene.points, scene.mask, regions).value <= 1e-12);

    // single full-mask region equals the global loss
    LossReport ms = loss_multiscale(noisy, scene.points, scene.mask, regions);
    LossReport g = loss_global(noisy, scene.points, scene.mask);
    CHECK(ms.value == doctest::Approx(g.value).epsilon(1e-12));

    // two disjoint regions, each affinely corrupted with its own transform
    RenderResult left = small_scene(6);
    std::vector<int> valid;
    for (int i = 0; i < left.mask.size(); ++i)
        if (left.mask.at(i)) valid.push_back(i);
    // pick two centers far apart in 3D (sphere front vs background)
    int c1 = -1, c2 = -1;
    for (int i : valid) {
        if (left.depth.values[i] < 4.0) c1 = i;
        if (left.depth.values[i] > 7.5) c2 = i;
    }
    REQUIRE(c1 >= 0);
    REQUIRE(c2 >= 0);
    std::vector<RegionSeed> two{RegionSeed{c1, 0.8}, RegionSeed{c2, 0.8}};
    auto tworeg = sample_sphere_regions(left.points, left.mask, two);
    REQUIRE(!tworeg[0].members.empty());
    REQUIRE(!tworeg[1].members.empty());

    PointMap corrupted = left.points;
    for (int i : tworeg[0].members) corrupted.points[i] = (left.points.points[i] - Vec3{1, 0, 2}) / 1.5;
    for (int i : tworeg[1].members) corrupted.points[i] = (left.points.points[i] + Vec3{0, 2, -1}) / 0.7;
    LossReport per_region = loss_multiscale(corrupted, left.points, left.mask, tworeg);
    CHECK(per_region.value <= 1e-9);
}

TEST_CASE("regions with fewer than two members are skipped and counted") {
    RenderResult scene = small_scene(7);
    int c = -1;
    for (int i = 0; i < scene.mask.size(); ++i)
        if (scene.mask.at(i)) {
            c = i;
            break;
        }
    std::vector<RegionSeed> tiny{RegionSeed{c, 1e-9}, RegionSeed{c, 100.0}};
    auto regions = sample_sphere_regions(scene.points, scene.mask, tiny);
    LossReport r = loss_multiscale(scene.points, scene.points, scene.mask, regions);
    CHECK(r.skipped_regions == 1);
    CHECK(r.region_count == 1);
}

TEST_CASE("scale loss hits the documented values") {
    RenderResult scene = small_scene(8);
    PointMap pred = scene.points;
    for (auto& p : pred.points) p = p / 2.5;  // gt = 2.5 * pred exactly

    LossReport at_target = loss_scale(std::log(2.5), pred, scene.points, scene.mask);
    CHECK(at_target.alignment.scale == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(at_target.value <= 1e-16);

    LossReport off = loss_scale(std::log(2.5) + 1.0, pred, scene.points, scene.mask);
    CHECK(off.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("monotone sensitivity: more noise never lowers the average loss") {
    RenderResult scene = small_scene(9);
    double prev = -1.0;
    for (double sigma : {0.0, 0.02, 0.08, 0.2}) {
        double total = 0.0;
        for (int seed = 0; seed < 20; ++seed) {
            SplitMix64 rng(1000 + seed);
            PointMap noisy = scene.points;
            for (int i = 0; i < noisy.size(); ++i) {
                if (!scene.mask.at(i)) continue;
                noisy.points[i].x += sigma * rng.normal();
                noisy.points[i].y += sigma * rng.normal();
                noisy.points[i].z += sigma * rng.normal();
            }
            total += loss_global(noisy, scene.points, scene.mask).value;
        }
        CHECK(total / 20.0 >= prev);
        prev = total / 20.0;
    }
}

TEST_CASE("default region schedule is seeded and mask-bound") {
    RenderResult scene = small_scene(10);
    RunConfig cfg;
    cfg.loss_region_centers = 16;
    auto seeds1 = make_loss_region_seeds(scene.points, scene.mask, cfg);
    auto seeds2 = make_loss_region_seeds(scene.points, scene.mask, cfg);
    REQUIRE(seeds1.size() == seeds2.size());
    CHECK(seeds1.size() == 16 * cfg.loss_radius_fractions.size());
    for (size_t i = 0; i < seeds1.size(); ++i) {
        CHECK(seeds1[i].center_index == seeds2[i].center_index);
        CHECK(scene.mask.at(seeds1[i].center_index));
        CHECK(seeds1[i].radius > 0.0);
    }
}
