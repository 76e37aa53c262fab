"""Metrics on R^d, finite point sets and Hausdorff distances.

Points are float64 vectors of a fixed dimension.  A ``Metric`` evaluates
distances with numpy broadcasting, so the same object serves scalar
queries and whole sampled signals.  Passing ``bounded=True`` anywhere
switches to the truncated metric ``min(1, rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidArgument

KINDS = ("euclidean", "chebyshev", "table")


@dataclass(frozen=True)
class Metric:
    """A metric on R^d.

    ``kind="table"`` is a metric on a finite label set {0, ..., m-1}: points
    are 1-vectors holding the label and distances are looked up in ``table``.
    """

    kind: str = "euclidean"
    dimension: int = 1
    table: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown metric kind {self.kind!r}")
        if int(self.dimension) < 1:
            raise InvalidArgument("metric dimension must be positive")
        if self.kind == "table":
            if self.table is None:
                raise InvalidArgument("table metric requires a distance table")
            tab = np.array(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[0] != tab.shape[1]:
                raise InvalidArgument("distance table must be square")
            if np.any(np.diag(tab) != 0) or not np.array_equal(tab, tab.T):
                raise InvalidArgument("distance table must be symmetric with zero diagonal")
            off = tab + np.eye(len(tab))
            if np.any(off <= 0):
                raise InvalidArgument("distance table must be positive off the diagonal")
            # triangle inequality: tab[i,k] <= tab[i,j] + tab[j,k]
            if np.any(tab[:, None, :] > tab[:, :, None] + tab[None, :, :] + 1e-12):
                raise InvalidArgument("distance table violates the triangle inequality")
            tab.setflags(write=False)
            object.__setattr__(self, "table", tab)
            object.__setattr__(self, "dimension", 1)

    @classmethod
    def from_spec(cls, spec: str, dimension: int = 1) -> "Metric":
        return cls(kind=spec, dimension=dimension)

    def distance(self, x, y, bounded: bool = False) -> np.ndarray:
        """Broadcasting distance over the trailing (coordinate) axis."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "euclidean":
            diff = x - y
            d = np.sqrt(np.sum(diff * diff, axis=-1))
        elif self.kind == "chebyshev":
            d = np.max(np.abs(x - y), axis=-1)
        else:
            i = x[..., 0].astype(np.intp)
            j = y[..., 0].astype(np.intp)
            d = self.table[i, j]
        if bounded:
            d = np.minimum(d, 1.0)
        return d

    def pairwise(self, X, Y, bounded: bool = False) -> np.ndarray:
        """Distance matrix between the rows of ``X`` (..., a, d) and ``Y`` (..., b, d)."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        return self.distance(X[..., :, None, :], Y[..., None, :, :], bounded=bounded)

    def norm(self, x) -> np.ndarray:
        return self.distance(x, np.zeros(self.dimension))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dimension": int(self.dimension)}
        if self.kind == "table":
            out["table"] = self.table.tolist()
        return out


def _dedupe(points: np.ndarray) -> np.ndarray:
    # exact comparison; keep first occurrence so index tie-breaks stay stable
    _, first = np.unique(points, axis=0, return_index=True)
    return points[np.sort(first)]


class PointSet:
    """Nonempty finite set of points in R^d, stored duplicate-free and read-only."""

    __slots__ = ("points",)

    def __init__(self, points: Iterable):
        arr = np.array(points, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidArgument("a PointSet needs at least one point")
        if np.isnan(arr).any():
            raise InvalidArgument("PointSet coordinates must not be NaN")
        arr = _dedupe(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PointSet is immutable")

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    def canonical(self) -> np.ndarray:
        return np.unique(self.points, axis=0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return a.shape == b.shape and bool(np.array_equal(a, b))

    def __hash__(self):
        return hash(self.canonical().tobytes())

    def union(self, other: "PointSet") -> "PointSet":
        return PointSet(np.vstack([self.points, other.points]))

    def __repr__(self):
        return f"PointSet({self.points.tolist()})"


def as_pointset(F) -> PointSet:
    return F if isinstance(F, PointSet) else PointSet(F)


def dist_point_set(x, F, m: Metric, bounded: bool = False) -> float:
    """rho(x, F) = min over y in F of rho(x, y)."""
    F = as_pointset(F)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(m.distance(x[None, :], F.points, bounded=bounded).min())


def nearest_index(x, F, m: Metric) -> int:
    """Index of the nearest member of ``F``; lowest index wins ties."""
    F = as_pointset(F)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return int(np.argmin(m.distance(x[None, :], F.points)))


def directed_hausdorff(A, B, m: Metric) -> float:
    """sup over a in A of rho(a, B)."""
    A, B = as_pointset(A), as_pointset(B)
    return float(m.pairwise(A.points, B.points).min(axis=1).max())


def hausdorff(A, B, m: Metric, bounded: bool = False) -> float:
    A, B = as_pointset(A), as_pointset(B)
    D = m.pairwise(A.points, B.points)
    h = float(max(D.min(axis=1).max(), D.min(axis=0).max()))
    return min(1.0, h) if bounded else h


def hausdorff_batch(a: np.ndarray, b: np.ndarray, m: Metric, bounded: bool = False) -> np.ndarray:
    """Hausdorff distances between stacks of point sets.

    ``a`` has shape (n, ka, d) and ``b`` (n, kb, d) or (kb, d).  Sets of
    different sizes must be padded by repeating one of their own members,
    which leaves the Hausdorff distance unchanged.
    """
    if b.ndim == 2:
        b = b[None, :, :]
    D = m.pairwise(a, b)
    h = np.maximum(D.min(axis=2).max(axis=1), D.min(axis=1).max(axis=1))
    return np.minimum(h, 1.0) if bounded else h


def eps_net_check(centers: Sequence, F, eps: float, m: Metric) -> bool:
    """True iff every point of F lies at distance < eps from some center."""
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    C = np.array(centers, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] == 0:
        raise InvalidArgument("an eps-net needs at least one center")
    F = as_pointset(F)
    return bool(np.all(m.pairwise(F.points, C).min(axis=1) < eps))
