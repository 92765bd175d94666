"""Point-map alignment, refinement, and evaluation toolkit."""

from ._pmgeo import (
    PmgeoError,
    apply_disparity_alignment,
    assemble_metric,
    boundary_f1,
    depth_to_points,
    evaluate,
    inject_artifact,
    loss_global,
    loss_multiscale,
    loss_scale,
    points_to_depth,
    poisson_complete,
    recover_focal_shift,
    refine_pipeline,
    render_scene,
    run_selftest,
    simulate_prediction,
    solve_disparity_affine_lsq,
    solve_scale_l1,
    solve_scale_shift_l1,
    solve_shift_l1,
)

__all__ = [
    "PmgeoError",
    "apply_disparity_alignment",
    "assemble_metric",
    "boundary_f1",
    "depth_to_points",
    "evaluate",
    "inject_artifact",
    "loss_global",
    "loss_multiscale",
    "loss_scale",
    "points_to_depth",
    "poisson_complete",
    "recover_focal_shift",
    "refine_pipeline",
    "render_scene",
    "run_selftest",
    "simulate_prediction",
    "solve_disparity_affine_lsq",
    "solve_scale_l1",
    "solve_scale_shift_l1",
    "solve_shift_l1",
]
