"""Solver result container shared by all solution methods."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveReport:
    u: np.ndarray
    residual_inf: float
    iterations: int
    energy: float
    method: str
    gauge: str  # "mean_zero" | "constraint_M" | "none"
    diagnostics: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "gauge": self.gauge,
            "u": [float(x) for x in self.u],
            "residual_inf": _jsonable(self.residual_inf),
            "iterations": int(self.iterations),
            "energy": _jsonable(self.energy),
            "diagnostics": {k: _jsonable(v) for k, v in sorted(self.diagnostics.items())},
        }


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v
