"""The cumulative ablation ladder: six configurations adding one component
at a time (distance graph only, up to the full category-specific model),
each trained with a shared seed and scored by WSADE."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import evaluate
from .model import ModelConfig, param_specs
from .training import TrainConfig, train

__all__ = ["ABLATION_ROWS", "AblationRow", "AblationTable",
           "ablation_configs", "run_ablation"]

# label -> (graphs enabled, plan-guided prediction, category-specific GRUs)
ABLATION_ROWS = (
    ("A1", ("distance",), False, False),
    ("A2", ("distance", "visibility"), False, False),
    ("A3", ("distance", "visibility", "planning"), False, False),
    ("A4", ("distance", "visibility", "planning", "category"), False, False),
    ("A5", ("distance", "visibility", "planning", "category"), True, False),
    ("A6", ("distance", "visibility", "planning", "category"), True, True),
)


def ablation_configs(base: ModelConfig):
    """The six ladder configurations derived from a base configuration."""
    out = []
    for label, graphs, pgp, cs in ABLATION_ROWS:
        out.append((label, replace(
            base,
            enabled_graphs=graphs,
            planning_fusion_enabled=pgp,
            category_specific_decoders=cs,
        )))
    return out


@dataclass
class AblationRow:
    label: str
    enabled_graphs: tuple
    planning_fusion: bool
    category_specific: bool
    wsade: float | None = None
    parameter_count: int = 0
    error: str | None = None

    def flags(self) -> dict:
        return {
            "distance": "distance" in self.enabled_graphs,
            "visibility": "visibility" in self.enabled_graphs,
            "planning": "planning" in self.enabled_graphs,
            "category": "category" in self.enabled_graphs,
            "plan_guided": self.planning_fusion,
            "cs_gru": self.category_specific,
        }


@dataclass
class AblationTable:
    rows: list = field(default_factory=list)

    def to_json_lines(self) -> str:
        lines = []
        for row in self.rows:
            rec = {"label": row.label, **row.flags(),
                   "wsade": row.wsade, "parameters": row.parameter_count}
            if row.error:
                rec["error"] = row.error
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines)

    def format_table(self) -> str:
        head = ("row   G^D  G^V  G^P  G^C  PGP  CS   WSADE")
        lines = [head]
        for row in self.rows:
            f = row.flags()
            marks = "    ".join("y" if f[k] else "." for k in
                                ("distance", "visibility", "planning",
                                 "category", "plan_guided", "cs_gru"))
            score = f"{row.wsade:.4f}" if row.wsade is not None else \
                (f"FAILED: {row.error}" if row.error else "-")
            lines.append(f"{row.label:<5} {marks}  {score}")
        return "\n".join(lines)


def run_ablation(samples, base_config: ModelConfig, train_config: TrainConfig,
                 eval_samples=None, progress=None) -> AblationTable:
    """Train and evaluate all six rows with the shared seed.

    A failing row is recorded with its error and does not stop the ladder.
    Evaluation defaults to the training samples (desk-scale smoke usage).
    """
    eval_samples = samples if eval_samples is None else eval_samples
    table = AblationTable()
    for label, config in ablation_configs(base_config):
        row = AblationRow(
            label=label,
            enabled_graphs=config.enabled_graphs,
            planning_fusion=config.planning_fusion_enabled,
            category_specific=config.category_specific_decoders,
            parameter_count=sum(
                int(np.prod(shape)) for _, shape, _ in param_specs(config)),
        )
        try:
            result = train(samples, config, train_config)
            report = evaluate(eval_samples, config, result.params)
            row.wsade = report.wsade
        except Exception as exc:  # keep the remaining rows running
            row.error = f"{type(exc).__name__}: {exc}"
        table.rows.append(row)
        if progress is not None:
            progress(row)
    return table
