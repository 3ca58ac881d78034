"""MNL choice mathematics and assortment families.

Products are numbered ``1..N``; ``0`` is the no-purchase option.  An
assortment is a sorted tuple of product indices.  Utility vectors are stored
0-based internally (``values[i - 1]`` is the utility of product ``i``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

Assortment = tuple  # sorted tuple of 1-based product indices

EMPTY: Assortment = ()

DEFAULT_ENUM_CAP = 10**6


class DimensionError(ValueError):
    """Product index or vector length inconsistent with N."""


class EnumerationTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class UtilityVector:
    values: np.ndarray
    R: float = 1.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", vals)
        if vals.size < 1:
            raise DimensionError("utility vector must have N >= 1 entries")
        if self.R < 1:
            raise ValueError(f"R must be >= 1, got {self.R}")
        lo, hi = 1.0 / self.R, float(self.R)
        tol = 1e-12 * max(1.0, hi)
        if np.any(vals < lo - tol) or np.any(vals > hi + tol):
            raise ValueError(f"utilities must lie in [1/R, R] = [{lo}, {hi}]")

    @property
    def N(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size


def as_array(v) -> np.ndarray:
    if isinstance(v, UtilityVector):
        return v.values
    return np.asarray(v, dtype=float).reshape(-1)


def make_assortment(items: Iterable[int], N: int | None = None) -> Assortment:
    """Normalize ``items`` to a sorted, duplicate-free tuple and validate it."""
    S = tuple(sorted({int(i) for i in items}))
    if S and S[0] < 1:
        raise DimensionError(f"product indices start at 1, got {S[0]}")
    if N is not None and S and S[-1] > N:
        raise DimensionError(f"product {S[-1]} out of range 1..{N}")
    return S


def _check(vals: np.ndarray, S: Sequence[int]):
    N = vals.size
    for i in S:
        if i < 1 or i > N:
            raise DimensionError(f"product {i} out of range 1..{N}")


def choice_prob(v, S: Sequence[int], i: int) -> float:
    vals = as_array(v)
    _check(vals, S)
    if i < 0 or i > vals.size:
        raise DimensionError(f"index {i} out of range 0..{vals.size}")
    denom = 1.0 + sum(vals[j - 1] for j in S)
    if i == 0:
        return 1.0 / denom
    if i not in S:
        return 0.0
    return vals[i - 1] / denom


def choice_probs(v, S: Sequence[int]) -> np.ndarray:
    """Probabilities of each product in ``S`` (same order as ``S``)."""
    vals = as_array(v)
    _check(vals, S)
    w = vals[np.asarray(S, dtype=int) - 1] if S else np.zeros(0)
    return w / (1.0 + w.sum())


def expected_revenue(v, S: Sequence[int], r) -> float:
    if not S:
        return 0.0
    r = np.asarray(r, dtype=float)
    idx = np.asarray(S, dtype=int) - 1
    return float(r[idx] @ choice_probs(v, S))


def expected_consumption(v, S: Sequence[int], a, k: int) -> float:
    """Expected units of resource ``k`` (0-based row of ``a``) used when offering ``S``."""
    if not S:
        return 0.0
    a = np.asarray(a, dtype=float)
    idx = np.asarray(S, dtype=int) - 1
    return float(a[k, idx] @ choice_probs(v, S))


def sample_purchase(v, S: Sequence[int], rng: np.random.Generator) -> int:
    """Draw the purchased product by inverse CDF over ``S`` ascending, then 0."""
    return purchase_from_uniform(v, S, rng.random())


def purchase_from_uniform(v, S: Sequence[int], u: float) -> int:
    if not S:
        return 0
    vals = as_array(v)
    denom = 1.0 + sum(vals[j - 1] for j in S)
    acc = 0.0
    for j in S:
        acc += vals[j - 1] / denom
        if u < acc:
            return j
    return 0


@dataclass(frozen=True)
class AssortmentFamily:
    """Feasible assortments: ``cardinality`` (|S| <= B), ``partition``
    (at most ``b`` items from each of ``p`` equal blocks) or ``explicit``."""

    kind: str
    N: int
    B: int | None = None
    p: int | None = None
    b: int | None = None
    members: tuple = field(default=())

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.kind == "cardinality":
            if self.B is None or self.B < 0:
                raise ValueError("cardinality family needs B >= 0")
        elif self.kind == "partition":
            if not self.p or self.b is None or self.b < 0:
                raise ValueError("partition family needs p >= 1 and b >= 0")
            if self.N % self.p:
                raise ValueError(f"N={self.N} not divisible by p={self.p}")
        elif self.kind == "explicit":
            mem = {make_assortment(S, self.N) for S in self.members}
            mem.add(EMPTY)
            object.__setattr__(self, "members", tuple(sorted(mem, key=_lex_key)))
        else:
            raise ValueError(f"unknown family kind {self.kind!r}")

    @classmethod
    def cardinality(cls, N: int, B: int) -> "AssortmentFamily":
        return cls("cardinality", N, B=B)

    @classmethod
    def partition(cls, N: int, p: int, b: int) -> "AssortmentFamily":
        return cls("partition", N, p=p, b=b)

    @classmethod
    def explicit(cls, N: int, members: Iterable[Iterable[int]]) -> "AssortmentFamily":
        return cls("explicit", N, members=tuple(tuple(S) for S in members))

    @property
    def max_size(self) -> int:
        if self.kind == "cardinality":
            return min(self.B, self.N)
        if self.kind == "partition":
            return self.p * min(self.b, self.N // self.p)
        return max(len(S) for S in self.members)

    def blocks(self) -> list[range]:
        """Product blocks of a partition family (1-based, contiguous)."""
        size = self.N // self.p
        return [range(j * size + 1, (j + 1) * size + 1) for j in range(self.p)]

    def size(self) -> int:
        """Number of members, including the empty assortment."""
        if self.kind == "cardinality":
            return sum(math.comb(self.N, j) for j in range(min(self.B, self.N) + 1))
        if self.kind == "partition":
            m = self.N // self.p
            per_block = sum(math.comb(m, j) for j in range(min(self.b, m) + 1))
            return per_block**self.p
        return len(self.members)

    def to_dict(self) -> dict:
        if self.kind == "cardinality":
            return {"kind": "cardinality", "B": self.B}
        if self.kind == "partition":
            return {"kind": "partition", "p": self.p, "b": self.b}
        return {"kind": "explicit", "members": [list(S) for S in self.members]}

    @classmethod
    def from_dict(cls, d: dict, N: int) -> "AssortmentFamily":
        kind = d["kind"]
        if kind == "cardinality":
            return cls.cardinality(N, int(d["B"]))
        if kind == "partition":
            return cls.partition(N, int(d["p"]), int(d["b"]))
        if kind == "explicit":
            return cls.explicit(N, d["members"])
        raise ValueError(f"unknown family kind {kind!r}")


def _lex_key(S):
    return (len(S) > 0, S)


def family_contains(family: AssortmentFamily, S: Sequence[int]) -> bool:
    S = tuple(S)
    if any(i < 1 or i > family.N for i in S) or len(set(S)) != len(S):
        return False
    if not S:
        return True
    if family.kind == "cardinality":
        return len(S) <= family.B
    if family.kind == "partition":
        size = family.N // family.p
        counts = [0] * family.p
        for i in S:
            counts[(i - 1) // size] += 1
        return max(counts) <= family.b
    return tuple(sorted(S)) in set(family.members)


def enumerate_family(family: AssortmentFamily, cap: int = DEFAULT_ENUM_CAP) -> Iterator[Assortment]:
    """Yield every member once in lexicographic order, starting with the empty set."""
    if family.size() > cap:
        raise EnumerationTooLarge(
            f"family has {family.size()} members, above the cap of {cap}"
        )
    if family.kind == "explicit":
        yield from family.members
        return
    yield EMPTY
    if family.kind == "cardinality":
        yield from _lex_subsets(range(1, family.N + 1), family.B)
        return
    for S in _lex_subsets(range(1, family.N + 1), family.max_size):
        if family_contains(family, S):
            yield S


def _lex_subsets(items, max_size) -> Iterator[Assortment]:
    # Depth-first generation gives lexicographic order on sorted tuples.
    items = list(items)

    def rec(start, prefix):
        for j in range(start, len(items)):
            S = prefix + (items[j],)
            yield S
            if len(S) < max_size:
                yield from rec(j + 1, S)

    if max_size >= 1:
        yield from rec(0, ())


def family_matrix(family: AssortmentFamily, cap: int = DEFAULT_ENUM_CAP):
    """Members as a list plus a boolean incidence matrix (members x N)."""
    members = list(enumerate_family(family, cap))
    X = np.zeros((len(members), family.N), dtype=bool)
    for row, S in enumerate(members):
        if S:
            X[row, np.asarray(S) - 1] = True
    return members, X


def count_cardinality_family(N: int, B: int) -> int:
    return sum(math.comb(N, j) for j in range(min(B, N) + 1))


__all__ = [
    "Assortment",
    "AssortmentFamily",
    "DimensionError",
    "EMPTY",
    "EnumerationTooLarge",
    "UtilityVector",
    "choice_prob",
    "choice_probs",
    "enumerate_family",
    "expected_consumption",
    "expected_revenue",
    "family_contains",
    "family_matrix",
    "make_assortment",
    "purchase_from_uniform",
    "sample_purchase",
]
