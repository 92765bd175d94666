import json
import math

import numpy as np
import pytest

import pmgeo


SCENE = json.dumps(
    {
        "width": 48,
        "height": 48,
        "focal_px": 48.0,
        "background_depth": 8.0,
        "primitives": [
            {"kind": "box", "center": [-0.9, 0.4, 3.2], "size": [1.4, 1.6, 0.6]},
            {"kind": "box", "center": [1.2, -0.7, 5.0], "size": [1.6, 1.2, 0.5]},
        ],
    }
)


@pytest.fixture(scope="module")
def scene():
    return pmgeo.render_scene(SCENE)


def test_render_and_unprojection_roundtrip(scene):
    depth = scene["depth"]
    mask = scene["mask"]
    assert depth.shape == (48, 48)
    assert mask.all()
    points = pmgeo.depth_to_points(depth, mask, scene["fx"], scene["fy"], scene["cx"], scene["cy"])
    np.testing.assert_array_equal(points, scene["points"])
    np.testing.assert_array_equal(pmgeo.points_to_depth(points), depth)


def test_scale_solver_exact():
    res = pmgeo.solve_scale_l1(np.array([1.0, 2.0]), np.array([3.0, 6.0]), np.array([1.0, 1.0]))
    assert res["scale"] == 3.0
    assert res["objective"] == 0.0


def test_scale_shift_solver_recovers_affine():
    rng = np.random.default_rng(7)
    src = rng.uniform(-4, 4, size=(300, 3))
    src[:, 2] = rng.uniform(0.5, 9.0, size=300)
    dst = 2.0 * src + np.array([1.0, -1.0, 3.0])
    w = 1.0 / dst[:, 2]
    res = pmgeo.solve_scale_shift_l1(src, dst, w)
    assert abs(res["scale"] - 2.0) < 1e-8
    assert res["objective"] < 1e-9


def test_loss_global_affine_invariance(scene):
    gt = scene["points"]
    pred = (gt - np.array([0.4, -0.2, 0.9])) / 1.7
    res = pmgeo.loss_global(pred, gt, scene["mask"])
    assert res["value"] < 1e-9
    assert abs(res["alignment"]["scale"] - 1.7) < 1e-6


def test_loss_scale_target(scene):
    gt = scene["points"]
    pred = gt / 2.5
    res = pmgeo.loss_scale(math.log(2.5), pred, gt, scene["mask"])
    assert res["value"] < 1e-12
    assert abs(res["scale_target"] - 2.5) < 1e-9


def test_camera_recovery(scene):
    rec = pmgeo.recover_focal_shift(scene["points"], scene["mask"])
    assert abs(rec["fx"] - 48.0) / 48.0 < 1e-3
    med = float(np.median(scene["depth"][scene["mask"]]))
    assert abs(rec["z_shift"]) < 1e-3 * med


def test_metrics_identity_and_scaled(scene):
    res = pmgeo.evaluate("affine_inv_point", scene["points"], scene["points"], scene["mask"])
    assert res["rel"] < 1e-9
    assert res["delta1"] == 100.0

    scaled = scene["depth"] * 1.3
    res = pmgeo.evaluate("metric_depth", scaled, scene["depth"], scene["mask"])
    assert res["delta1"] == 0.0

    f1 = pmgeo.boundary_f1(scene["depth"], scene["depth"], scene["mask"])
    assert f1 == 100.0


def test_poisson_completion_exact():
    u = np.arange(32.0)
    truth = 2.0 * np.exp(0.03 * u[None, :] + 0.02 * u[:, None])
    known = np.ones((32, 32), dtype=bool)
    known[10:22, 8:20] = False
    fill, mask = pmgeo.poisson_complete(np.where(known, truth, 0.0), known, truth * 3.0)
    assert mask.all()
    np.testing.assert_allclose(fill, truth, rtol=1e-8)


def test_refine_pipeline_flags_boundary_shift(scene):
    depth, mask = scene["depth"], scene["mask"]
    injected_depth, injected_mask, footprint = pmgeo.inject_artifact(
        depth, mask, json.dumps({"kind": "boundary_shift", "shift_px": 3})
    )
    assert footprint.sum() > 0
    pred = pmgeo.simulate_prediction(
        depth, mask, scene["fx"], scene["fy"], scene["cx"], scene["cy"],
        scale=2.0, log_bias_amplitude=0.12,
    )
    refined, out_mask, filtered, report = pmgeo.refine_pipeline(
        injected_depth, injected_mask, pred,
        scene["fx"], scene["fy"], scene["cx"], scene["cy"],
    )
    assert out_mask.all()
    removed = injected_mask & ~filtered
    recall = (removed & footprint).sum() / footprint.sum()
    assert recall >= 0.9
    assert report["cg_residual"] <= 1e-10


def test_errors_are_typed():
    flat = np.full((16, 16), 5.0)
    mask = np.ones((16, 16), dtype=bool)
    points = pmgeo.depth_to_points(flat, mask, 16.0, 16.0, 8.0, 8.0)
    with pytest.raises(pmgeo.PmgeoError):
        pmgeo.recover_focal_shift(points, mask)  # single-depth ambiguity
