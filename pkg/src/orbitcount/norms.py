"""Norms on coefficient and vector spaces, optionally precomposed with a linear map."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


def _euclidean(v: np.ndarray):
    if v.dtype == object:
        v = v.astype(float)
    return np.sqrt(np.sum(v * v, axis=-1))


def _sup(v: np.ndarray):
    return np.abs(v).max(axis=-1)


@dataclass(frozen=True, eq=False)
class NormSpec:
    """A norm v -> evaluator(v @ transform).

    ``evaluator`` takes an array whose last axis is the vector and returns the
    norms along it.  For the sup norm the maximising coordinate changes along
    curves, which quadrature routines query through ``piecewise``.
    """

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    transform: np.ndarray | None = None

    @classmethod
    def euclidean(cls) -> NormSpec:
        return cls("euclidean", _euclidean)

    @classmethod
    def sup(cls) -> NormSpec:
        return cls("sup", _sup)

    @classmethod
    def custom(cls, evaluator: Callable[[np.ndarray], np.ndarray], name: str = "custom") -> NormSpec:
        return cls(name, evaluator)

    @classmethod
    def by_name(cls, name: str) -> NormSpec:
        if name == "euclidean":
            return cls.euclidean()
        if name == "sup":
            return cls.sup()
        raise ValueError(f"unknown norm {name!r}; expected 'euclidean' or 'sup'")

    @property
    def piecewise(self) -> bool:
        return self.name == "sup"

    def components(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.dtype != object:
            v = v.astype(float)
        return v if self.transform is None else v @ self.transform

    def __call__(self, v) -> float:
        out = self.evaluator(self.components(v))
        return out.item() if isinstance(out, np.generic | np.ndarray) else out

    def rows(self, arr) -> np.ndarray:
        return self.evaluator(self.components(arr))

    def precompose(self, matrix) -> NormSpec:
        """The norm v -> self(v @ matrix)."""
        m = np.asarray(matrix, dtype=float)
        t = m if self.transform is None else m @ self.transform
        return replace(self, transform=t)

    def homogeneity_defect(self, dim: int, samples: int = 100, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            v = rng.normal(size=dim)
            lam = rng.uniform(-10, 10)
            base = self(v)
            worst = max(worst, abs(self(lam * v) - abs(lam) * base) / max(1.0, abs(lam) * base))
        return worst
