"""What-if prediction: rerun the model under alternative ego plans and
report how the predicted futures diverge from the recorded-plan baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .graphs import AdjacencySet, build_adjacency, build_planning_graph
from .model import ModelConfig, ModelParams, forward
from .scene import Sample, ego_center

__all__ = ["WhatIfScenario", "WhatIfResult", "what_if"]


@dataclass
class WhatIfScenario:
    """A base sample plus named alternative ego plans (each t_pred x 2)."""

    sample: Sample
    plans: dict = field(default_factory=dict)

    def __post_init__(self):
        horizon = self.sample.t_pred
        for name, plan in self.plans.items():
            plan = np.asarray(plan, dtype=np.float64)
            if plan.shape != (horizon, 2):
                raise UsageError(
                    f"plan '{name}' has shape {plan.shape}, expected ({horizon}, 2)"
                )
            self.plans[name] = plan


@dataclass
class WhatIfResult:
    name: str
    predictions: np.ndarray  # (N, T_pred, 2), original frame
    planning_column: np.ndarray  # (N,) raw planning-graph edges into the ego
    divergence: np.ndarray  # (N,) per-agent L2 divergence from the base run
    max_coordinate_diff: float


def what_if(sample: Sample, alternative_plans: dict, params: ModelParams,
            config: ModelConfig):
    """Run the base plan and every named alternative.

    Only the planning graph depends on the plan, so the other three graphs
    are built once. Returns (base result, [alternative results]); divergence
    is per-agent Frobenius distance between predicted trajectories.
    """
    scenario = WhatIfScenario(sample, dict(alternative_plans))
    centered = ego_center(sample)
    adjacency = build_adjacency(centered, config.d_d, config.beta_degrees)

    def run(plan_centered: np.ndarray, name: str, base_pred=None):
        variant = centered.copy()
        variant.ego_plan = plan_centered
        adj = AdjacencySet(
            distance=adjacency.distance,
            visibility=adjacency.visibility,
            planning=build_planning_graph(variant, config.beta_degrees),
            category=adjacency.category,
        )
        pred = forward(variant, config, params, adj).data + centered.origin
        if base_pred is None:
            divergence = np.zeros(sample.n_agents)
            max_diff = 0.0
        else:
            delta = pred - base_pred
            divergence = np.sqrt((delta ** 2).sum(axis=(1, 2)))
            max_diff = float(np.abs(delta).max())
        return WhatIfResult(
            name=name,
            predictions=pred,
            planning_column=adj.planning[:, Sample.EGO_INDEX].copy(),
            divergence=divergence,
            max_coordinate_diff=max_diff,
        )

    base = run(centered.ego_plan, "base")
    results = []
    for name, plan in scenario.plans.items():
        results.append(run(plan - centered.origin, name, base.predictions))
    return base, results
