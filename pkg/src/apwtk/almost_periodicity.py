"""Almost-period scans, relative density and tolerance-level classification.

Nothing here certifies almost periodicity: a finite window can only show
that a signal is consistent with it at a given (eps, l, tau range).  Each
report therefore carries the query that produced it.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .seminorms import check_p, d_pl, window_max_mean, window_sums
from .signal import Signal, shift, shift_distance_series

CLASSES = ("none", "equi_weyl", "stepanov", "bohr")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("APWTK_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class APQuery:
    eps: float
    l: float
    tau_range: tuple
    tau_step: float
    p: float = 1.0
    bounded: bool = False
    ladder: Optional[tuple] = None  # window lengths tried for the equi-Weyl class
    density_bound: Optional[float] = None  # largest gap still called relatively dense

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgument("eps must be positive")
        if not self.tau_step > 0:
            raise InvalidArgument("tau_step must be positive")
        lo, hi = map(float, self.tau_range)
        if hi - lo < self.l:
            raise InvalidArgument("the tau range must be at least one window long")
        object.__setattr__(self, "tau_range", (lo, hi))
        if not self.bounded:
            check_p(self.p)

    @property
    def span(self) -> float:
        return self.tau_range[1] - self.tau_range[0]

    @property
    def gap_bound(self) -> float:
        return self.span / 2 if self.density_bound is None else self.density_bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_range"] = list(self.tau_range)
        d["ladder"] = list(self.ladder) if self.ladder else None
        return d


@dataclass
class APReport:
    query: APQuery
    accepted_taus: list
    max_gap: Optional[float]
    relatively_dense_at: Optional[float]
    cls: str
    degenerate: bool = False
    class_sets: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "query": self.query.to_dict(),
            "accepted_taus": self.accepted_taus,
            "max_gap": self.max_gap,
            "relatively_dense_at": self.relatively_dense_at,
            "class": self.cls,
            "degenerate": self.degenerate,
        }


def class_at_least(cls: str, target: str) -> bool:
    return CLASSES.index(cls) >= CLASSES.index(target)


def density_certificate(taus: Sequence[float], lo: float, hi: float) -> Optional[float]:
    """Smallest a such that every length-a interval inside [lo, hi] meets ``taus``."""
    t = np.sort(np.asarray([x for x in taus if lo <= x <= hi], dtype=float))
    if t.size == 0:
        return None
    gaps = np.diff(np.concatenate([[lo], t, [hi]]))
    return float(gaps.max())


def _tau_steps(grid, q: APQuery, max_window: int) -> np.ndarray:
    h = grid.h
    stride = max(1, int(round(q.tau_step / h)))
    k_lo = int(math.ceil(q.tau_range[0] / h - 1e-9))
    k_hi = int(math.floor(q.tau_range[1] / h + 1e-9))
    ks = np.arange(k_lo, k_hi + 1, stride)
    if ks.size == 0:
        raise InvalidArgument("empty tau grid")
    if grid.n - np.abs(ks).max() < max_window:
        raise InvalidArgument("the overlap at the largest |tau| is shorter than the window")
    return ks


def _series(obj, k: int, bounded: bool) -> np.ndarray:
    if isinstance(obj, np.ndarray):  # batch of scalar series, shape (J, n)
        n = obj.shape[1]
        a, b = (k, 0) if k >= 0 else (0, -k)
        r = np.abs(obj[:, a:a + n - abs(k)] - obj[:, b:b + n - abs(k)])
        return np.minimum(r, 1.0) if bounded else r
    return shift_distance_series(obj, k, bounded)[None, :]


def _criteria_values(obj, ks, criteria, threads: int) -> dict:
    """For each criterion key, an array (J, K) of distances between obj and its shifts.

    criteria: {key: ("sup",) | ("mean", p, m, bounded)}
    """
    def work(chunk):
        out = {key: [] for key in criteria}
        for k in chunk:
            series, prefix = {}, {}
            for key, c in criteria.items():
                bounded = c[0] == "mean" and c[3]
                if bounded not in series:
                    series[bounded] = _series(obj, int(k), bounded)
                r = series[bounded]
                if c[0] == "sup":
                    out[key].append(r.max(axis=1))
                    continue
                _, p, m, b = c
                p = 1.0 if b else p
                # one prefix sum serves every window length
                if (bounded, p) not in prefix:
                    rp = r if p == 1.0 else r ** p
                    prefix[(bounded, p)] = np.concatenate([np.zeros((r.shape[0], 1)), np.cumsum(rp, axis=1)], axis=1)
                cs = prefix[(bounded, p)]
                out[key].append(((cs[:, m:] - cs[:, :-m]).max(axis=1) / m) ** (1.0 / p))
        return {key: np.stack(v, axis=1) for key, v in out.items()}

    if threads <= 1 or len(ks) < 2 * threads:
        return work(ks)
    chunks = np.array_split(ks, threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(work, chunks))
    return {key: np.concatenate([p[key] for p in parts], axis=1) for key in criteria}


def _stepanov_steps(grid) -> int:
    return max(1, int(round(1.0 / grid.h)))


def _classify(ks, h, accepted: dict, q: APQuery, ladder_keys) -> tuple:
    """Monotone by construction: each class scans the union of the stricter sets."""
    lo, hi = q.tau_range

    def dense(mask):
        a = density_certificate(ks[mask] * h, lo, hi)
        return a is not None and a <= q.gap_bound

    bohr = accepted["sup"]
    step = bohr | accepted["stepanov"]
    ew = [step | accepted[key] for key in ladder_keys]
    sets = {"bohr": bohr, "stepanov": step, "equi_weyl": ew}
    if dense(bohr):
        cls = "bohr"
    elif dense(step):
        cls = "stepanov"
    elif any(dense(m) for m in ew):
        cls = "equi_weyl"
    else:
        cls = "none"
    return cls, sets


def _criteria_for(grid, q: APQuery):
    ladder = tuple(q.ladder) if q.ladder else (q.l,)
    crit = {
        "query": ("mean", q.p, grid.steps(q.l, "window length"), q.bounded),
        "sup": ("sup",),
        "stepanov": ("mean", q.p, _stepanov_steps(grid), q.bounded),
    }
    keys = []
    for i, l in enumerate(ladder):
        key = f"ladder{i}"
        crit[key] = ("mean", q.p, grid.steps(l, "window length"), q.bounded)
        keys.append(key)
    max_window = max(c[2] for c in crit.values() if c[0] == "mean")
    return crit, keys, max_window


def is_degenerate(f, q: APQuery) -> bool:
    """f stays within eps (windowed) of its mean value."""
    if not isinstance(f, Signal) or f.metric.kind == "table":
        return False
    const = f.with_values(np.broadcast_to(f.values.mean(axis=0), f.values.shape))
    return d_pl(f, const, q.p, q.l, q.bounded) < q.eps


def scan_almost_periods(f, q: APQuery, threads: Optional[int] = None) -> APReport:
    """Accept tau iff D_{p,l}(f, f(.+tau)) < eps on the overlap; classify at tolerance."""
    return scan_many([f], q, threads)[0]


def scan_many(objs, q: APQuery, threads: Optional[int] = None) -> list:
    """Scan several signals on one grid; scalar signals are batched together."""
    threads = default_threads() if threads is None else threads
    grid = objs[0].grid
    crit, keys, max_window = _criteria_for(grid, q)
    ks = _tau_steps(grid, q, max_window)
    scalar = [i for i, o in enumerate(objs) if isinstance(o, Signal) and o.dimension == 1 and o.metric.kind != "table"]
    results = {}
    if scalar:
        batch = np.stack([objs[i].values[:, 0] for i in scalar])
        vals = _criteria_values(batch, ks, crit, threads)
        for row, i in enumerate(scalar):
            results[i] = {key: v[row] for key, v in vals.items()}
    for i, o in enumerate(objs):
        if i not in results:
            vals = _criteria_values(o, ks, crit, threads)
            results[i] = {key: v[0] for key, v in vals.items()}
    reports = []
    for i, o in enumerate(objs):
        accepted = {key: v < q.eps for key, v in results[i].items()}
        cls, sets = _classify(ks, grid.h, accepted, q, keys)
        taus = [float(x) for x in ks[accepted["query"]] * grid.h]
        a = density_certificate(taus, *q.tau_range)
        reports.append(APReport(q, taus, a, a, cls, is_degenerate(o, q), sets))
    return reports


def accepted_shifts(objs, q: APQuery, threads: Optional[int] = None) -> list:
    """Taus accepted jointly by every object under the query metric only."""
    threads = default_threads() if threads is None else threads
    grid = objs[0].grid
    m = grid.steps(q.l, "window length")
    ks = _tau_steps(grid, q, m)
    crit = {"query": ("mean", q.p, m, q.bounded)}
    ok = np.ones(len(ks), dtype=bool)
    for o in objs:
        ok &= _criteria_values(o, ks, crit, threads)["query"][0] < q.eps
    return [float(x) for x in ks[ok] * grid.h]


def shift_distance(f, tau: float, p: float, l: float, bounded: bool = False) -> float:
    s = shift(f, tau)
    return d_pl(s.shifted, s.base, p, l, bounded)


def measure_criterion(f, tau: float, eps: float, delta: float, l: float) -> bool:
    """Every window of length l has meas{rho(f(t), f(t+tau)) >= delta} < eps*l."""
    k = int(round(tau / f.grid.h))
    r = shift_distance_series(f, k)
    m = f.grid.steps(l, "window length")
    if m > len(r):
        raise InvalidArgument("window longer than the overlap")
    counts = window_sums((r >= delta).astype(float), m)
    return bool(counts.max() < eps * m)


def returning_sequence_check(f, taus: Sequence[float], ladder: Sequence[tuple], min_suffix: Optional[int] = None) -> bool:
    """Finite proxy for an f-returning sequence.

    For every (eps, delta, l) in ``ladder`` a tail of ``taus`` of length at
    least ``min_suffix`` (default: half the list, rounded up) must pass the
    measure criterion.
    """
    taus = list(taus)
    if not taus:
        return True
    need = math.ceil(len(taus) / 2) if min_suffix is None else min_suffix
    for eps, delta, l in ladder:
        run = 0
        for tau in reversed(taus):
            if not measure_criterion(f, tau, eps, delta, l):
                break
            run += 1
        if run < need:
            return False
    return True


@dataclass
class ContainmentReport:
    fraction: Optional[float]
    supported: bool
    n_candidates: int
    factor: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def mod_containment_proxy(f, g, q: APQuery, candidate_taus=None, factor: float = 2.0) -> ContainmentReport:
    """Share of g's accepted almost periods that f also accepts at ``factor * eps``.

    A fraction of 1 supports Mod f being contained in Mod g.  The factor is
    a heuristic allowance for discretization, not a theorem.
    """
    if is_degenerate(g, q):
        return ContainmentReport(None, False, 0, factor, degenerate=True)
    if candidate_taus is None:
        candidate_taus = scan_almost_periods(g, q).accepted_taus
    if not candidate_taus:
        return ContainmentReport(None, False, 0, factor)
    looser = APQuery(factor * q.eps, q.l, q.tau_range, q.tau_step, q.p, q.bounded)
    hits = sum(shift_distance(f, t, looser.p, looser.l, looser.bounded) < looser.eps for t in candidate_taus)
    frac = hits / len(candidate_taus)
    return ContainmentReport(frac, frac == 1.0, len(candidate_taus), factor)


def return_time_tau0(f, eps: float, l: float, p: float = 1.0, bounded: bool = True, tau_max: Optional[float] = None) -> float:
    """Largest grid tau0 with D(f, f(.+tau)) < eps for all grid tau in [0, tau0]."""
    h = f.grid.h
    m = f.grid.steps(l, "window length")
    k_max = f.grid.n - m if tau_max is None else min(f.grid.n - m, int(math.floor(tau_max / h + 1e-9)))
    k0 = 0
    for k in range(1, k_max + 1):
        r = shift_distance_series(f, k, bounded)
        pp = 1.0 if bounded else p
        if float(window_max_mean(r if pp == 1.0 else r ** pp, m)) ** (1.0 / pp) >= eps:
            break
        k0 = k
    return k0 * h
