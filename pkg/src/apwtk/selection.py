"""Selections of set-valued signals with finite point-set values.

All selections pick exact members of the sampled sets, so membership is
checked with zero tolerance.  Cells for refinement come from the generic
distance decomposition, run on the joint metric
``max(Hausdorff'(F(t), F(s)), rho'(g(t), g(s)))`` with primes denoting
truncation at 1.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .almost_periodicity import APQuery, ContainmentReport, accepted_shifts, shift_distance
from .decomposition import build_separator, decompose_by_distance, level_set
from .errors import CertificateError, ConstructionError, InvalidArgument, PreconditionError
from .metric import hausdorff_batch
from .signal import Mask, SetValuedSignal, Signal, require_same_grid


# ---------------------------------------------------------------- moduli


@dataclass(frozen=True)
class Modulus:
    """eta with eta(0) = 0, nondecreasing and positive on (0, inf)."""

    kind: str
    params: tuple

    def __post_init__(self):
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "linear":
            if len(p) != 1 or not p[0] > 0:
                raise InvalidArgument("linear modulus needs c > 0")
        elif self.kind == "power":
            if len(p) != 2 or not (p[0] > 0 and p[1] > 0):
                raise InvalidArgument("power modulus needs c > 0 and beta > 0")
        elif self.kind == "table":
            if len(p) < 4 or len(p) % 2:
                raise InvalidArgument("table modulus needs pairs x0,y0,x1,y1,...")
            xs, ys = np.array(p[0::2]), np.array(p[1::2])
            if xs[0] != 0 or ys[0] != 0 or np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) < 0) or np.any(ys[1:] <= 0):
                raise InvalidArgument("table must start at (0, 0), with increasing x and nondecreasing positive y")
        else:
            raise InvalidArgument(f"unknown modulus kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Modulus":
        kind, *rest = text.split(",")
        return cls(kind.strip(), tuple(float(x) for x in rest))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return self.params[0] * x
        if self.kind == "power":
            return self.params[0] * np.power(x, self.params[1])
        xs, ys = np.array(self.params[0::2]), np.array(self.params[1::2])
        return np.interp(x, xs, ys)  # constant beyond the last knot

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


# ---------------------------------------------------------------- reports


@dataclass
class SelectionReport:
    selection: Signal
    membership_defect: float
    distance_certificate: Optional[float]
    refinement_depth: int
    per_level: list = field(default_factory=list)
    ap_transfer: Optional[ContainmentReport] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, embed_csv: bool = True) -> dict:
        from .serialize import signal_to_csv_text

        d = {
            "membership_defect": self.membership_defect,
            "distance_certificate": self.distance_certificate,
            "refinement_depth": self.refinement_depth,
            "per_level": self.per_level,
            "ap_transfer": self.ap_transfer.to_dict() if self.ap_transfer else None,
        }
        d.update(self.extra)
        if embed_csv:
            d["selection"] = signal_to_csv_text(self.selection)
        return d


def membership_defect(F: SetValuedSignal, f: Signal) -> float:
    """max_t rho(f(t), F(t)); 0.0 exactly when every sample is a member."""
    if np.all(F.contains(f.values)):
        return 0.0
    return float(F.point_distances(f).max())


def ap_transfer(selection: Signal, F: SetValuedSignal, g: Signal, q: APQuery, factor: float = 4.0) -> ContainmentReport:
    """Share of the taus accepted jointly by F and g that the selection accepts at factor*eps."""
    joint = accepted_shifts([F, g], q)
    if not joint:
        return ContainmentReport(None, False, 0, factor)
    hits = sum(shift_distance(selection, t, q.p, q.l, q.bounded) < factor * q.eps for t in joint)
    frac = hits / len(joint)
    return ContainmentReport(frac, frac == 1.0, len(joint), factor)


# ---------------------------------------------------------------- eps-selection


def gamma(n: int) -> float:
    """Summable tolerance weights with sum (gamma_n + gamma_{n+1}) < 1/6."""
    return 2.0 ** (-n - 1) / 6.0


def _hausdorff_rows(F: SetValuedSignal, i: int, bounded: bool) -> np.ndarray:
    target = np.broadcast_to(F.padded[i], F.padded.shape[:1] + F.padded.shape[1:])
    return hausdorff_batch(F.padded, target, F.metric, bounded)


class JointDistance:
    """Rows of max(Hausdorff'(F(t), F(s)), rho'(g(t), g(s))) with a bounded cache.

    One instance can be shared by several selections on the same (F, g).
    """

    def __init__(self, F: SetValuedSignal, g: Optional[Signal], max_rows: int = 1024):
        self.F, self.g, self.max_rows = F, g, max_rows
        self._rows = {}

    def __call__(self, i: int) -> np.ndarray:
        d = self._rows.get(i)
        if d is None:
            d = _hausdorff_rows(self.F, i, True)
            if self.g is not None:
                d = np.maximum(d, self.g.metric.distance(self.g.values, self.g.values[i], bounded=True))
            if len(self._rows) < self.max_rows:
                self._rows[i] = d
        return d


def _pick_nearest(F: SetValuedSignal, cell_center: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """For each sample, the member of F(cell_center) nearest to the target (lowest index on ties)."""
    cand = F.padded[cell_center]  # (n, k, d)
    d = F.metric.distance(cand, targets[:, None, :])
    return cand[np.arange(len(cell_center)), np.argmin(d, axis=1)]


def _center_per_sample(cells, n: int) -> np.ndarray:
    out = np.full(n, -1)
    for mask, c in zip(cells.masks, cells.centers):
        out[mask.bits] = c
    if np.any(out < 0):
        raise ConstructionError("refinement cells do not cover the grid")
    return out


def select_eps(
    F: SetValuedSignal,
    g: Signal,
    eps: float,
    depth: int = 3,
    b: Optional[float] = None,
    separator_depth: int = 1,
    ap_query: Optional[APQuery] = None,
    distances: Optional[JointDistance] = None,
) -> SelectionReport:
    """Member-valued f with rho(f(t), g(t)) < rho(g(t), F(t)) + eps at every sample.

    Level n cells have joint tolerance gamma_n * eps; each cell is
    represented by its center sample (a medoid).  Picks move to the
    nearest member of the next representative set and finally to the
    nearest member of the true F(t).
    """
    require_same_grid(F.grid, g.grid)
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    if depth < 1:
        raise InvalidArgument("depth must be at least 1")
    grid = F.grid
    b = grid.L if b is None else b
    e = min(eps, 1.0)  # the truncated metrics never exceed 1
    rows = JointDistance(F, g) if distances is None else distances
    per_level = []
    pick = prev_center = None
    for n in range(1, depth + 1):
        cells = decompose_by_distance(grid, rows, gamma(n) * e, b, separator_depth)
        center = _center_per_sample(cells, grid.n)
        if n == 1:
            pick = _pick_nearest(F, center, g.values[center])
            gd = F.metric.distance(F.padded[center], g.values[center][:, None, :]).min(axis=1)
            anchor = F.metric.distance(pick, g.values[center])
            if np.any(anchor >= e / 6 + gd):
                raise ConstructionError("level-1 anchor misses its bound", level=1)
            per_level.append({"gamma_n": gamma(n), "cells": len(cells.masks), "max_jump": 0.0, "jump_bound": 0.0})
        else:
            new = _pick_nearest(F, center, pick)
            jump = F.metric.distance(new, pick)
            rep_dist = hausdorff_batch(F.padded[prev_center], F.padded[center], F.metric, True)
            bound = 2 * (gamma(n - 1) + gamma(n)) * e
            bad = np.flatnonzero((jump > 2 * rep_dist) | (jump >= bound))
            if bad.size:
                i = int(bad[0])
                raise CertificateError(
                    f"refinement jump {jump[i]:.3g} at t={grid.times[i]:.6g} breaks the bound {bound:.3g}"
                )
            pick = new
            per_level.append(
                {"gamma_n": gamma(n), "cells": len(cells.masks), "max_jump": float(jump.max()), "jump_bound": bound}
            )
        prev_center = center
    final = F.nearest_members(pick)
    f = Signal(grid, final, F.metric)
    r = F.point_distances(g)
    cert = float(np.max(f.metric.distance(final, g.values) - r - e))
    if not cert < 0:
        raise CertificateError("distance bound violated after projection")
    report = SelectionReport(f, membership_defect(F, f), cert, depth, per_level)
    if ap_query is not None:
        report.ap_transfer = ap_transfer(f, F, g, ap_query)
    return report


# ---------------------------------------------------------------- eta-modulus selection


def select_modulus(
    F: SetValuedSignal,
    g: Signal,
    eta: Modulus,
    maxlevel: int = 4,
    depth: int = 2,
    b: Optional[float] = None,
    separator_depth: int = 1,
    ap_query: Optional[APQuery] = None,
) -> SelectionReport:
    """Member-valued f with rho(f, g) <= rho(g, F) + eta(rho(g, F)) samplewise.

    Dyadic strata T_j (rho(g, F) < 2^-j on T_j, > 2^-j-1 off it) are built
    as separated level sets and nested by intersection; stratum
    T_{j-1} minus T_j takes an eps-selection at eps = eta(2^-j-1), and the
    innermost T_maxlevel takes the member nearest to g.
    """
    require_same_grid(F.grid, g.grid)
    if maxlevel < 1:
        raise InvalidArgument("maxlevel must be at least 1")
    grid = F.grid
    b = grid.L if b is None else b
    r = F.point_distances(g)
    rs = Signal(grid, r)
    strata_masks, T_prev = [], Mask.full(grid)
    nested = [T_prev]
    for j in range(1, maxlevel + 1):
        a = 2.0 ** (-j - 1)
        sep = build_separator(a / 3, b, separator_depth, [r - a - 2 * a / 3], grid=grid, estimate_alpha_tilde=False)
        T = level_set(rs, a, a, sep).mask & T_prev
        strata_masks.append(T_prev - T)
        nested.append(T)
        T_prev = T
    parts, per_level = [], []
    rows = JointDistance(F, g)
    for j in range(1, maxlevel + 1):
        e = float(eta(2.0 ** (-j - 1)))
        rep = select_eps(F, g, e, depth, b, separator_depth, distances=rows)
        parts.append(rep.selection.values)
        per_level.append({"stratum": j, "eps_j": e, "samples": strata_masks[j - 1].count, "levels": rep.per_level})
    inner = F.nearest_members(g)
    out = inner.copy()
    for vals, mask in zip(parts, strata_masks):
        out[mask.bits] = vals[mask.bits]
    f = Signal(grid, out, F.metric)
    dfg = F.metric.distance(out, g.values)
    cert = float(np.max(dfg - r - eta(r)))
    if cert > 0:
        raise CertificateError("modulus distance bound violated")
    # f(n; .) moves only on T_n minus T_{n+1}, from g to f_{n+1}
    gaps = []
    for n in range(1, maxlevel):
        on = strata_masks[n].bits
        gap = float(dfg[on].max()) if on.any() else 0.0
        bound = 2.0 ** -n + 2 * float(eta(2.0 ** (-n - 2)))
        if not gap < bound:
            raise CertificateError(f"sup-gap {gap:.3g} at step {n} exceeds {bound:.3g}")
        gaps.append({"n": n, "sup_gap": gap, "bound": bound})
    report = SelectionReport(
        f, membership_defect(F, f), cert, maxlevel, per_level, extra={"sup_gaps": gaps, "eta": eta.to_dict()}
    )
    if ap_query is not None:
        report.ap_transfer = ap_transfer(f, F, g, ap_query)
    return report


# ---------------------------------------------------------------- dense family


@dataclass
class DenseFamily:
    reports: list
    anchors: np.ndarray
    coverage_defect: float

    @property
    def selections(self) -> list:
        return [r.selection for r in self.reports]


def coverage_defect(F: SetValuedSignal, selections: Sequence[Signal]) -> float:
    """max_t Hausdorff(F(t), {f_j(t)}); selections are members, so one direction suffices."""
    pts = np.stack([s.values for s in selections], axis=1)  # (n, J, d)
    d = F.metric.distance(F.padded[:, :, None, :], pts[:, None, :, :])  # (n, k, J)
    return float(d.min(axis=2).max())


def point_anchors(F: SetValuedSignal, count: int) -> np.ndarray:
    """Farthest-point order over all values of F; prefixes do not depend on count."""
    pts = np.unique(F.all_points(), axis=0)
    mind = F.metric.distance(pts, pts[0])
    order = [0]
    while len(order) < min(count, len(pts)):
        nxt = int(np.argmax(mind))
        order.append(nxt)
        mind = np.minimum(mind, F.metric.distance(pts, pts[nxt]))
    return pts[order]


def dense_family(
    F: SetValuedSignal,
    count: int,
    eps_ladder: Sequence[float] = (0.5, 0.25),
    depth: int = 2,
    b: Optional[float] = None,
) -> DenseFamily:
    """Selections against constant anchors; their values approximate F(t) as count grows."""
    if count < 1:
        raise InvalidArgument("count must be at least 1")
    anchors = point_anchors(F, count)
    reports = []
    for x in anchors:
        gx = Signal(F.grid, np.broadcast_to(x, (F.grid.n, F.dimension)).copy(), F.metric)
        for e in eps_ladder:
            rep = select_eps(F, gx, e, depth, b)
            rep.extra.update({"anchor": x.tolist(), "eps": e})
            reports.append(rep)
    return DenseFamily(reports, anchors, coverage_defect(F, [r.selection for r in reports]))


def sup_net(signals: Sequence[Signal], eps: float) -> list:
    """Indices of a greedy eps-net of the family in the sup metric."""
    if not signals:
        return []
    vals = np.stack([s.values for s in signals])
    metric = signals[0].metric

    def sup_to(i):
        return metric.distance(vals, vals[i][None]).max(axis=1)

    mind, net = sup_to(0), [0]
    while mind.max() >= eps:
        nxt = int(np.argmax(mind))
        net.append(nxt)
        mind = np.minimum(mind, sup_to(nxt))
    return net


# ---------------------------------------------------------------- eps-net selections


EXHAUSTIVE_LIMIT = 100_000


def _net_radius(pts: np.ndarray, centers: np.ndarray, metric) -> float:
    return float(metric.pairwise(pts, centers).min(axis=1).max())


def _min_separation(centers: np.ndarray, metric) -> float:
    if len(centers) < 2:
        return math.inf
    d = metric.pairwise(centers, centers)
    return float(d[~np.eye(len(centers), dtype=bool)].min())


def best_net(points: np.ndarray, n: int, eps: float, metric) -> Optional[np.ndarray]:
    """An n-point net of radius <= eps made of members, or None.

    Exhaustive when feasible: smallest radius, then largest separation,
    then lexicographic index order.  Otherwise greedy farthest-point.
    """
    k = len(points)
    if k <= n:
        return points[list(range(k)) + [k - 1] * (n - k)]
    if math.comb(k, n) <= EXHAUSTIVE_LIMIT:
        D = metric.pairwise(points, points)
        best, key = None, None
        for combo in itertools.combinations(range(k), n):
            c = list(combo)
            rad = float(D[:, c].min(axis=1).max())
            if rad > eps:
                continue
            sub = D[np.ix_(c, c)]
            sep = float(sub[~np.eye(n, dtype=bool)].min()) if n > 1 else math.inf
            cand = (rad, -sep, combo)
            if key is None or cand < key:
                best, key = c, cand
        return None if best is None else points[best]
    order = [0]
    mind = metric.distance(points, points[0])
    while len(order) < n:
        nxt = int(np.argmax(mind))
        order.append(nxt)
        mind = np.minimum(mind, metric.distance(points, points[nxt]))
    return points[order] if mind.max() <= eps else None


def net_radius(F: SetValuedSignal, selections: Sequence[Signal]) -> np.ndarray:
    """Per sample: max over y in F(t) of min_i rho(y, f_i(t))."""
    pts = np.stack([s.values for s in selections], axis=1)
    d = F.metric.distance(F.padded[:, :, None, :], pts[:, None, :, :])
    return d.min(axis=2).max(axis=1)


def select_eps_net(
    F: SetValuedSignal,
    n: int,
    eps: float,
    eps_prime: float,
    b: Optional[float] = None,
    separator_depth: int = 1,
) -> list:
    """n member-valued selections forming an eps'-net of F(t) at every sample."""
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    if not (0 < eps < eps_prime):
        raise InvalidArgument("need 0 < eps < eps_prime")
    grid = F.grid
    nets = {}
    for i, s in enumerate(F.sets):
        if s not in nets:
            nets[s] = best_net(s.points, n, eps, F.metric)
        if nets[s] is None:
            raise PreconditionError(f"no {n}-point {eps}-net of members at sample {i} (t={grid.times[i]:.6g})")
    tol = (eps_prime - eps) / 2
    b = grid.L if b is None else b
    cells = decompose_by_distance(grid, lambda i: _hausdorff_rows(F, i, False), tol, b, separator_depth)
    center = _center_per_sample(cells, grid.n)
    chosen = np.stack([nets[F.sets[c]] for c in center])  # (n_samples, n, d)
    sels = [Signal(grid, F.nearest_members(chosen[:, i, :]), F.metric) for i in range(n)]
    rad = net_radius(F, sels)
    if not np.all(rad < eps_prime):
        raise CertificateError("eps'-net property failed after gluing")
    cert = float(rad.max() - eps_prime)
    return [
        SelectionReport(s, membership_defect(F, s), cert, 1, extra={"cells": len(cells.masks), "net_index": i})
        for i, s in enumerate(sels)
    ]
