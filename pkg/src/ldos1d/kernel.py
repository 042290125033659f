"""Containers for LDOS kernels and survival-probability series."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LdosKernel:
    """Discrete distribution P(n|m) over perturbed levels n.

    ``levels``, ``energies`` and ``weights`` are parallel arrays. ``energies``
    holds the perturbed-basis energies E_n used for Fourier transforms and
    moments; ``ref_energy`` is the reference energy E_m of the prepared state.
    ``stderr`` is only filled for ensemble averages.
    """

    ref_level: int
    ref_energy: float
    levels: np.ndarray
    energies: np.ndarray
    weights: np.ndarray
    method: str
    desymmetrized: bool = False
    stderr: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = _frozen(self.levels, dtype=np.int64)
        energies = _frozen(self.energies)
        weights = _frozen(self.weights)
        if not (levels.shape == energies.shape == weights.shape) or levels.ndim != 1:
            raise ContractError("levels, energies and weights must be 1-d arrays of equal length")
        if not np.all(np.isfinite(weights)) or not np.all(np.isfinite(energies)):
            raise ContractError("kernel weights and energies must be finite")
        if np.any(weights < 0):
            raise ContractError("kernel weights must be non-negative")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "weights", weights)
        if self.stderr is not None:
            stderr = _frozen(self.stderr)
            if stderr.shape != weights.shape:
                raise ContractError("stderr must match weights")
            object.__setattr__(self, "stderr", stderr)

    def __len__(self):
        return len(self.levels)

    @property
    def offsets(self):
        return self.levels - self.ref_level

    @property
    def omega(self):
        """Energy differences E_n - E_m."""
        return self.energies - self.ref_energy

    def total(self) -> float:
        return float(np.sum(self.weights))

    def is_normalized(self, tol=1e-6) -> bool:
        return abs(self.total() - 1.0) <= tol

    def require_normalized(self, tol=1e-6):
        if not self.is_normalized(tol):
            raise ContractError(
                f"kernel ({self.method}) is not normalized: total weight {self.total():.12g}"
            )

    def weight_of(self, n: int) -> float:
        idx = np.flatnonzero(self.levels == n)
        return float(self.weights[idx[0]]) if idx.size else 0.0

    def normalized(self) -> "LdosKernel":
        total = self.total()
        if total <= 0:
            raise ContractError("cannot normalize a kernel with zero total weight")
        meta = dict(self.metadata, raw_total=total)
        stderr = None if self.stderr is None else self.stderr / total
        return LdosKernel(self.ref_level, self.ref_energy, self.levels, self.energies,
                          self.weights / total, self.method, self.desymmetrized, stderr, meta)

    def to_dict(self) -> dict:
        out = {
            "ref_level": int(self.ref_level),
            "ref_energy": float(self.ref_energy),
            "method": self.method,
            "desymmetrized": bool(self.desymmetrized),
            "metadata": self.metadata,
            "n": self.levels.tolist(),
            "E_n": self.energies.tolist(),
            "weight": self.weights.tolist(),
        }
        if self.stderr is not None:
            out["stderr"] = self.stderr.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "LdosKernel":
        return cls(d["ref_level"], d["ref_energy"], d["n"], d["E_n"], d["weight"],
                   d["method"], d.get("desymmetrized", False), d.get("stderr"),
                   d.get("metadata", {}))


@dataclass(frozen=True, eq=False)
class SurvivalSeries:
    """Sampled survival probability P(t).

    ``masked`` flags samples where the method is singular (the classical
    time-domain result diverges at multiples of pi); those values are +inf.
    """

    times: np.ndarray
    values: np.ndarray
    method: str
    masked: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        if times.shape != values.shape or times.ndim != 1:
            raise ContractError("times and values must be 1-d arrays of equal length")
        masked = np.zeros(times.shape, bool) if self.masked is None else np.asarray(self.masked, bool)
        if masked.shape != times.shape:
            raise ContractError("masked must match times")
        if np.any(~np.isfinite(values[~masked])):
            raise ContractError(f"non-finite survival values outside masked samples ({self.method})")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masked", _frozen(masked, dtype=bool))

    def __len__(self):
        return len(self.times)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "metadata": self.metadata,
            "t": self.times.tolist(),
            "value": [float(v) if np.isfinite(v) else None for v in self.values],
            "masked": self.masked.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurvivalSeries":
        values = [np.inf if v is None else v for v in d["value"]]
        return cls(d["t"], values, d["method"], d.get("masked"), d.get("metadata", {}))
