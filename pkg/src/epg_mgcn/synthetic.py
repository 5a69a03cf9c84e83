"""Scripted desk-scale fixtures: a tiny heterogeneous dataset with known
kinematics, used by the convergence/ablation tests and the demo scripts."""

from __future__ import annotations

import numpy as np

from .scene import Sample

__all__ = ["make_synthetic_dataset"]


def make_synthetic_dataset(n_samples: int = 8, t_obs_points: int = 6,
                           t_pred: int = 6) -> list:
    """Deterministic constant-velocity scenes, three agent types per scene.

    Each sample rotates the layout by 45 degrees and nudges the speeds, so
    the samples are distinct but trivially learnable: a correct model drives
    the training error toward zero. The trailing vehicle always heads into
    the ego's planned path, so every scene carries one planning-graph edge.
    """
    samples = []
    for k in range(n_samples):
        ang = np.pi / 4 * k
        rot = np.array([[np.cos(ang), -np.sin(ang)],
                        [np.sin(ang), np.cos(ang)]])
        ego_speed = 1.2 + 0.05 * k
        starts = np.array([
            [0.0, 0.0],     # ego vehicle
            [-4.0, 3.0],    # trailing vehicle, one lane over
            [9.0, -2.0],    # pedestrian ahead, crossing
            [-6.0, -5.0],   # bicyclist approaching diagonally
        ]) @ rot.T
        vels = np.array([
            [ego_speed, 0.0],
            [1.0 + 0.04 * k, -0.15],
            [0.05, 0.35 + 0.02 * k],
            [0.5, 0.5 - 0.03 * k],
        ]) @ rot.T
        t_o = np.arange(t_obs_points)[None, :, None]
        observed = starts[:, None, :] + t_o * vels[:, None, :]
        t_f = np.arange(1, t_pred + 1)[None, :, None]
        future = observed[:, -1][:, None, :] + t_f * vels[:, None, :]
        samples.append(Sample(
            categories=["vehicle", "vehicle", "pedestrian", "bicyclist"],
            observed=observed,
            future=future,
            ego_plan=future[0].copy(),
            obs_mask=np.ones((4, t_obs_points), dtype=bool),
            fut_mask=np.ones((4, t_pred), dtype=bool),
            frame_rate=2.0,
            agent_ids=[0, 1, 2, 3],
        ))
    return samples
