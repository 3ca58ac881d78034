"""Problem instances and their JSON serialization.

JSON schema (all keys required)::

    {
      "N": int, "K": int, "T": int, "R": float,
      "r": [N floats in [0, 1]],
      "a": [[N ints in {0, 1}] x K],      # row k = resource k
      "c": [K floats in (0, 1]],          # T * c[k] must be a positive integer
      "family": {"kind": "cardinality", "B": int}
              | {"kind": "partition", "p": int, "b": int}
              | {"kind": "explicit", "members": [[int, ...], ...]},
      "v_star": [N floats in [1/R, R]]
    }

Floats are written with ``repr`` precision so load/save round-trips exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mnl import AssortmentFamily, UtilityVector


@dataclass
class Instance:
    r: np.ndarray
    a: np.ndarray
    c: np.ndarray
    T: int
    family: AssortmentFamily
    v_star: UtilityVector

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(-1)
        self.a = np.asarray(self.a, dtype=float).reshape(-1, self.r.size)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.T = int(self.T)
        if not isinstance(self.v_star, UtilityVector):
            raise TypeError("v_star must be a UtilityVector")
        N, K = self.N, self.K
        if self.a.shape != (K, N):
            raise ValueError(f"consumption matrix must be K x N = {K} x {N}")
        if self.v_star.N != N or self.family.N != N:
            raise ValueError("v_star / family dimension does not match N")
        if np.any(self.r < 0) or np.any(self.r > 1):
            raise ValueError("revenues must lie in [0, 1]")
        if not np.all((self.a == 0) | (self.a == 1)):
            raise ValueError("consumption matrix must be binary")
        if self.T < 1:
            raise ValueError("horizon T must be positive")
        if np.any(self.c <= 0) or np.any(self.c > 1):
            raise ValueError("capacity rates must lie in (0, 1]")
        caps = self.T * self.c
        if not np.allclose(caps, np.round(caps), rtol=0, atol=1e-9):
            raise ValueError("T * c(k) must be an integer for every resource")

    @property
    def N(self) -> int:
        return self.r.size

    @property
    def K(self) -> int:
        return self.c.size

    @property
    def R(self) -> float:
        return self.v_star.R

    @property
    def capacities(self) -> np.ndarray:
        """Total inventories C(k) = T c(k) as integers."""
        return np.round(self.T * self.c).astype(np.int64)

    def public_view(self) -> "PublicView":
        return PublicView(self.N, self.K, self.T, self.R, self.r, self.a, self.c, self.family)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "K": self.K,
            "T": self.T,
            "R": float(self.R),
            "r": [float(x) for x in self.r],
            "a": [[int(x) for x in row] for row in self.a],
            "c": [float(x) for x in self.c],
            "family": self.family.to_dict(),
            "v_star": [float(x) for x in self.v_star.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        N, K = int(d["N"]), int(d["K"])
        a = np.asarray(d["a"], dtype=float).reshape(K, N) if K else np.zeros((0, N))
        inst = cls(
            r=d["r"],
            a=a,
            c=d["c"],
            T=d["T"],
            family=AssortmentFamily.from_dict(d["family"], N),
            v_star=UtilityVector(d["v_star"], float(d["R"])),
        )
        if inst.N != N or inst.K != K:
            raise ValueError("declared N/K do not match array sizes")
        return inst

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PublicView:
    """Everything a policy may see: the instance without ``v_star``."""

    N: int
    K: int
    T: int
    R: float
    r: np.ndarray
    a: np.ndarray
    c: np.ndarray
    family: AssortmentFamily

    @property
    def capacities(self) -> np.ndarray:
        return np.round(self.T * self.c).astype(np.int64)
