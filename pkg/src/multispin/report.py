"""Verification records."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def jsonable(v: Any) -> Any:
    """Convert numpy scalars, complex numbers, spins and nomes to JSON data."""
    if hasattr(v, "as_dict"):
        return v.as_dict()
    if hasattr(v, "components") and hasattr(v, "tolist"):
        return v.tolist()
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return v.real if v.imag == 0 else [v.real, v.imag]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


@dataclass
class CheckReport:
    """One verification record: ``passed`` is exactly ``residual <= tolerance``."""

    check: str
    residual: float
    tolerance: float
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.residual) and self.residual <= self.tolerance)

    @classmethod
    def make(cls, check, residual, tolerance, params=None, extra=None, seconds=0.0):
        return cls(check, float(residual), float(tolerance), params or {}, extra or {},
                   float(seconds))

    def record(self, index: int | None = None) -> dict:
        rec = {"index": index, "check": self.check, "params": jsonable(self.params),
               "residual": jsonable(self.residual), "tol": self.tolerance,
               "pass": self.passed, "ms": round(1000 * self.seconds, 3)}
        if self.extra:
            rec["extra"] = jsonable(self.extra)
        return rec

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.check}: residual {self.residual:.3e} (tol {self.tolerance:.1e})"
