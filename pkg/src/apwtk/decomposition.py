"""Level-set decomposition of sampled functions into disjoint mask families.

The pipeline follows the constructive route for equi-Weyl functions:

1. greedy covering centers ``x_j`` at radius eps/3;
2. for each center a small periodic *separator* ``g_j`` (a finite sum of
   ``Delta_k sin(alpha_k t)`` with ``alpha_k`` multiples of ``2 pi / b``)
   that keeps ``rho(f, x_j) - 2 eps/3 + g_j`` away from zero except on a
   set of small windowed measure;
3. level sets ``T'_j = {rho(f, x_j) + g_j <= 2 eps/3}``, disjointified in
   center order.

Every sample in ``T_j`` satisfies ``rho(f(t), x_j) < eps``; this is checked
samplewise on every call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .almost_periodicity import APQuery, class_at_least, return_time_tau0, scan_many
from .errors import CertificateError, ConstructionError, InvalidArgument
from .seminorms import window_sums
from .signal import Grid, Mask, Signal, require_same_grid

DEFAULT_MAX_HARMONIC = 4096


# ---------------------------------------------------------------- covering


@dataclass
class Cover:
    indices: list  # sample index of each center, in selection order
    centers: np.ndarray
    fraction: float  # windowed share of samples >= delta from every center
    l: float
    delta: float


def _windowed_fraction(flags: np.ndarray, m: int) -> float:
    return float(window_sums(flags.astype(float), m).max() / m)


def greedy_cover(dist_to: Callable[[int], np.ndarray], n: int, delta: float, eps: Optional[float], m: int) -> tuple:
    """Farthest-point centers until the windowed far fraction drops below eps.

    ``eps=None`` means: continue until every sample is within delta.
    Returns (center indices, final windowed far fraction, min distances).
    """
    idx = [0]
    mind = np.array(dist_to(0), dtype=float)
    while True:
        far = mind >= delta
        frac = _windowed_fraction(far, m)
        if (eps is None and not far.any()) or (eps is not None and frac < eps):
            return idx, frac, mind
        nxt = int(np.argmax(mind))
        idx.append(nxt)
        mind = np.minimum(mind, dist_to(nxt))


def covering_centers(f: Signal, delta: float, eps: float, l: Optional[float] = None) -> Cover:
    """Finitely many sample values x_j with sup_xi meas{t in window: rho(f, U x_j) >= delta} < eps*l."""
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    if not eps > 0:
        raise InvalidArgument("eps must be positive (eps = 0 cannot terminate)")
    l = f.grid.L if l is None else l
    m = f.grid.steps(l, "window length")
    vals = f.values
    idx, frac, _ = greedy_cover(lambda i: f.metric.distance(vals, vals[i]), f.grid.n, delta, eps, m)
    return Cover(idx, vals[idx].copy(), frac, l, delta)


# ---------------------------------------------------------------- separator


def separation_parameters(eps: float, Delta: float) -> dict:
    """Threshold delta(eps, Delta) from the explicit N, eps', delta' recipe."""
    if not (0 < eps <= 1):
        raise InvalidArgument("eps must lie in (0, 1]")
    N = int(math.floor(3.0 / eps))  # smallest N with 1/(N+1) < eps/3
    eps_p = eps / (3.0 * N * (N + 1))
    delta_p = 2.0 * math.sin(math.pi / (2 * N)) * math.sin(math.pi * eps_p / 6.0)
    return {"N": N, "eps_prime": eps_p, "delta_prime": delta_p, "delta": min(1.0, delta_p * Delta / 3.0)}


def separation_measure(f, g, delta: float, l: float) -> float:
    """max over windows of meas{t : |f(t) + g(t)| < delta} / l.

    When neither argument is a Signal, l is a window length in samples.
    """
    fv = f.scalar if isinstance(f, Signal) else np.asarray(f, dtype=float)
    gv = g.scalar if isinstance(g, Signal) else np.asarray(g, dtype=float)
    if isinstance(f, Signal) and isinstance(g, Signal):
        require_same_grid(f.grid, g.grid)
    grid = f.grid if isinstance(f, Signal) else (g.grid if isinstance(g, Signal) else None)
    m = grid.steps(l, "window length") if grid is not None else int(l)
    if m > fv.shape[-1]:
        raise InvalidArgument("window longer than the signal")
    near = (np.abs(fv + gv) < delta).astype(float)
    return float(window_sums(near, m).max(axis=-1).max() / m)


@dataclass
class Separator:
    """g(t) = sum_j Delta_j sin(alpha_j t), b-periodic, sup|g| < Delta."""

    Delta: float
    b: float
    amplitudes: list
    alphas: list
    deltas: list
    windows: list
    eps_levels: list
    alpha_tilde: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.amplitudes)

    @property
    def sup_bound(self) -> float:
        return float(sum(self.amplitudes))

    def evaluate(self, t: np.ndarray, start: int = 0) -> np.ndarray:
        out = np.zeros(len(t))
        for A, a in zip(self.amplitudes[start:], self.alphas[start:]):
            out += A * np.sin(a * t)
        return out

    def tail(self, j: int, t: np.ndarray) -> np.ndarray:
        """g_j = sum over k >= j."""
        return self.evaluate(t, start=j)

    def levels(self) -> list:
        return [
            {"delta_j": d, "l_j": l, "alpha_j": a, "Delta_j": A, "eps_j": e}
            for d, l, a, A, e in zip(self.deltas, self.windows, self.alphas, self.amplitudes, self.eps_levels)
        ]

    def check_invariants(self) -> None:
        A = self.amplitudes
        if not A or A[0] != self.Delta / 2:
            raise CertificateError("first amplitude must be Delta/2")
        for j in range(1, len(A)):
            if not A[j] < 2.0 ** -(j + 1) * self.Delta:
                raise CertificateError(f"amplitude {j} too large for the geometric budget")
            for k in range(j):
                if A[j] > 2.0 ** -(j - k) * self.deltas[k]:
                    raise CertificateError(f"amplitude {j} breaks the chain bound against level {k}")
        if not self.sup_bound < self.Delta:
            raise CertificateError("amplitude sum reaches Delta")
        unit = 2 * math.pi / self.b
        for a in self.alphas:
            if abs(a / unit - round(a / unit)) > 1e-9 or round(a / unit) < 1:
                raise CertificateError("frequency is not a positive multiple of 2 pi / b")


def _family_array(family, grid: Optional[Grid]) -> tuple:
    rows = []
    for s in family:
        if isinstance(s, Signal):
            grid = require_same_grid(*(x for x in (grid, s.grid) if x is not None))
            rows.append(s.scalar)
        else:
            rows.append(np.asarray(s, dtype=float))
    if grid is None:
        raise InvalidArgument("a grid is needed when the family holds raw arrays")
    return np.atleast_2d(np.array(rows, dtype=float)), grid


def build_separator(
    Delta: float,
    b: float,
    depth: int,
    family: Sequence,
    grid: Optional[Grid] = None,
    l: Optional[float] = None,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
    alpha_max: Optional[float] = None,
    estimate_alpha_tilde: bool = True,
) -> Separator:
    """Level-by-level separator for a finite family of scalar signals.

    At level j the amplitude obeys Delta_j < 2^{-(j+1)} Delta and
    Delta_j <= 2^{-(j-k)} delta_k for k < j; then the smallest harmonic
    alpha_j of 2 pi / b is taken for which every family member f satisfies
    sup_xi meas{|f_j + Delta_j sin(alpha_j t)| < 2 delta_j} < 2^{-j-1} l_j,
    where f_j already includes the lower levels.  The doubled threshold
    makes the bound robust to any later tail of sup norm <= delta_j.
    """
    if not (Delta > 0 and b > 0) or depth < 1:
        raise InvalidArgument("need Delta > 0, b > 0 and depth >= 1")
    F, grid = _family_array(family, grid)
    t = grid.times
    l = (grid.steps(grid.L / 4) or 1) * grid.h if l is None else l
    m = grid.steps(l, "window length")
    if alpha_max is None:
        alpha_max = math.pi / (4 * grid.h)  # at least 8 samples per period
    unit = 2 * math.pi / b
    k_cap = min(max_harmonic, int(math.floor(alpha_max / unit + 1e-9)))
    if k_cap < 1:
        raise ConstructionError("2 pi / b exceeds the usable frequency band of the grid", level=0)

    amps, alphas, deltas, eps_levels, tildes = [], [], [], [], []
    current = F.copy()
    for j in range(depth):
        eps_j = 2.0 ** -(j + 1)
        if j == 0:
            A = Delta / 2
        else:
            A = 0.9 * 2.0 ** -(j + 1) * Delta
            A = min([A] + [2.0 ** -(j - k) * deltas[k] for k in range(j)])
        par = separation_parameters(eps_j, A)
        d_j = par["delta"]
        k_start, tilde = 1, math.inf
        if estimate_alpha_tilde:
            tau0 = min(
                return_time_tau0(Signal(grid, row), par["eps_prime"] * d_j, l, bounded=True, tau_max=2 * eps_j / 9)
                for row in current
            )
            tilde = math.pi / tau0 if tau0 > 0 else math.inf
            if tilde <= alpha_max:
                k_start = max(1, int(math.ceil(tilde / unit - 1e-9)))
        chosen = None
        for k in range(k_start, k_cap + 1):
            wave = A * np.sin(k * unit * t)
            near = (np.abs(current + wave) < 2 * d_j).astype(float)
            worst = float(window_sums(near, m).max() / m)
            if worst < eps_j:
                chosen = k * unit
                break
        if chosen is None:
            raise ConstructionError(f"no harmonic of 2pi/b up to {k_cap} separates level {j}", level=j)
        current = current + A * np.sin(chosen * t)
        amps.append(A)
        alphas.append(chosen)
        deltas.append(d_j)
        eps_levels.append(eps_j)
        tildes.append(tilde)
    sep = Separator(Delta, b, amps, alphas, deltas, [l] * depth, eps_levels, tildes)
    sep.check_invariants()
    g = sep.evaluate(t)
    if not np.abs(g).max() < Delta:
        raise CertificateError("separator sup norm reaches Delta on the grid")
    for j in range(depth):
        worst = float(window_sums((np.abs(F + g) < deltas[j]).astype(float), m).max() / m)
        if not worst < eps_levels[j]:
            raise CertificateError(f"level {j} measure bound fails for the assembled separator")
    return sep


# ---------------------------------------------------------------- level sets and masks


@dataclass
class LevelSet:
    mask: Mask
    boundary_samples: int
    threshold: float


def level_set(f: Signal, a: float, eps: float, separator: Optional[Separator] = None) -> LevelSet:
    """T = {f + g <= a + 2 eps/3}: f < a + eps on T and f > a off T.

    Requires sup|g| < eps/3; samples exactly at the threshold go into T.
    """
    t = f.grid.times
    if separator is None:
        g, margin = np.zeros(f.grid.n), 0.0
    else:
        if not separator.sup_bound < eps / 3:
            raise InvalidArgument("separator amplitude must stay below eps/3")
        g, margin = separator.evaluate(t), separator.deltas[0]
    thr = a + 2 * eps / 3
    v = f.scalar + g
    bits = v <= thr
    boundary = int(np.sum(np.abs(v - thr) < margin)) if margin > 0 else int(np.sum(v == thr))
    mask = Mask(f.grid, bits)
    fv = f.scalar
    if np.any(fv[bits] >= a + eps) or np.any(fv[~bits] <= a):
        raise CertificateError("level set guarantee violated")
    return LevelSet(mask, boundary, thr)


def mask_algebra(A: Mask, B: Optional[Mask], op: str) -> Mask:
    if op == "union":
        return A | B
    if op == "intersection":
        return A & B
    if op == "difference":
        return A - B
    if op == "complement":
        return ~A
    raise InvalidArgument(f"unknown mask operation {op!r}")


def product_family(first: Sequence[Mask], second: Sequence[Mask]) -> list:
    """Nonempty pairwise intersections ((j, k), T1_j & T2_k)."""
    out = []
    for j, a in enumerate(first):
        for k, b in enumerate(second):
            c = a & b
            if c.count:
                out.append(((j, k), c))
    return out


def rle_encode(bits: np.ndarray) -> str:
    """'0:12,1:5,0:3' style run-length code."""
    bits = np.asarray(bits, dtype=bool)
    if bits.size == 0:
        return ""
    edges = np.flatnonzero(np.diff(bits.astype(np.int8))) + 1
    starts = np.concatenate([[0], edges])
    lens = np.diff(np.concatenate([starts, [bits.size]]))
    return ",".join(f"{int(bits[s])}:{int(n)}" for s, n in zip(starts, lens))


def rle_decode(code: str) -> np.ndarray:
    if not code:
        return np.zeros(0, dtype=bool)
    parts = [p.split(":") for p in code.split(",")]
    return np.concatenate([np.full(int(n), v == "1") for v, n in parts])


# ---------------------------------------------------------------- decomposition


@dataclass
class MaskFamily:
    masks: list
    centers: np.ndarray
    center_indices: list
    tail_fraction: float
    module_tag: str
    eps: float
    separators: list = field(default_factory=list)
    truncation_tails: list = field(default_factory=list)
    classes: list = field(default_factory=list)
    class_query: Optional[APQuery] = None
    cover_fraction: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.masks[0].grid

    def union(self) -> Mask:
        out = Mask.empty(self.grid)
        for m in self.masks:
            out = out | m
        return out

    def tail(self) -> Mask:
        return ~self.union()

    def labels(self) -> np.ndarray:
        """Mask index per sample, -1 in the tail."""
        lab = np.full(self.grid.n, -1)
        for j, m in enumerate(self.masks):
            lab[m.bits] = j
        return lab

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "centers": self.centers.tolist(),
            "masks": [rle_encode(m.bits) for m in self.masks],
            "tail_fraction": self.tail_fraction,
            "truncation_tails": self.truncation_tails,
            "module_tag": self.module_tag,
            "levels": [s.levels() for s in self.separators],
            "classes": self.classes,
            "class_query": self.class_query.to_dict() if self.class_query else None,
        }


@dataclass
class CellDecomposition:
    masks: list  # disjoint Masks
    centers: list  # sample index per mask
    separators: list
    tail: Mask


def decompose_by_distance(
    grid: Grid,
    dist_to: Callable[[int], np.ndarray],
    eps: float,
    b: float,
    depth: int = 2,
    budget: Optional[float] = None,
    l_cover: Optional[float] = None,
    l_separator: Optional[float] = None,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
) -> CellDecomposition:
    """Generic decomposition where centers are samples and ``dist_to(i)`` gives
    the distance of every sample to sample i (any metric).

    ``budget=None`` covers every sample, so the tail is empty.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    m = grid.steps(grid.L if l_cover is None else l_cover, "window length")
    rows = {}

    def cached(i: int) -> np.ndarray:
        if i not in rows:
            rows[i] = np.asarray(dist_to(i), dtype=float)
        return rows[i]

    idx, _, _ = greedy_cover(cached, grid.n, eps / 3, budget, m)
    t = grid.times
    masks, seps, centers = [], [], []
    covered = np.zeros(grid.n, dtype=bool)
    for c in idx:
        d = cached(c)
        level = d - 2 * eps / 3
        sep = build_separator(eps / 3, b, depth, [level], grid=grid, l=l_separator,
                              max_harmonic=max_harmonic, estimate_alpha_tilde=False)
        prime = d + sep.evaluate(t) <= 2 * eps / 3
        if np.any(d[prime] >= eps):
            raise CertificateError("a sample in a level set is eps-far from its center")
        bits = prime & ~covered
        covered |= prime
        if bits.any():
            masks.append(Mask(grid, bits))
            seps.append(sep)
            centers.append(c)
    return CellDecomposition(masks, centers, seps, Mask(grid, ~covered))


def default_period(f: Signal) -> float:
    """b = 2 pi / lambda_1 for the dominant nonzero exponent (window length if none)."""
    from .fourier import dominant_frequency, scan_exponents

    hi = min(10.0, math.pi / (4 * f.grid.h))
    lam = dominant_frequency(scan_exponents(f, (0.0, hi), top_k=4, floor=1e-6))
    return f.grid.L if lam is None else 2 * math.pi / lam


def decompose(
    f: Signal,
    eps: float,
    b: Optional[float] = None,
    depth: int = 2,
    tail_budget: Optional[float] = None,
    classify: Optional[APQuery] = None,
    l_separator: Optional[float] = None,
    max_harmonic: int = DEFAULT_MAX_HARMONIC,
) -> MaskFamily:
    """Disjoint masks T_j and centers x_j with rho(f(t), x_j) < eps on T_j.

    ``b`` should make 2 pi / b a (near-)almost-period frequency of f; by
    default it comes from the dominant Fourier exponent.  ``tail_budget``
    (default eps) bounds the share of samples left outside every mask.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    b = default_period(f) if b is None else b
    budget = eps if tail_budget is None else tail_budget
    vals = f.values
    cells = decompose_by_distance(
        f.grid,
        lambda i: f.metric.distance(vals, vals[i]),
        eps,
        b,
        depth,
        budget,
        l_separator=l_separator,
        max_harmonic=max_harmonic,
    )
    masks = cells.masks
    centers = vals[cells.centers].copy() if cells.centers else np.zeros((0, f.dimension))
    for mask, c in zip(masks, centers):
        if np.any(f.metric.distance(vals[mask.bits], c) >= eps):
            raise CertificateError("decomposition certificate violated")
    covered = np.zeros(f.grid.n, dtype=bool)
    tails = []
    for mask in masks:
        covered |= mask.bits
        tails.append(1.0 - covered.mean())
    tail = 1.0 - covered.mean()
    if not tail < budget and budget > 0:
        raise CertificateError(f"tail fraction {tail} exceeds the budget {budget}")
    fam = MaskFamily(
        masks=masks,
        centers=centers,
        center_indices=list(cells.centers),
        tail_fraction=float(tail),
        module_tag=f"harmonics of 2pi/b with b={b!r}",
        eps=eps,
        separators=cells.separators,
        truncation_tails=[float(x) for x in tails],
    )
    if classify is not None:
        fam.classes = [r.cls for r in scan_many([m.indicator() for m in masks], classify)]
        fam.class_query = classify
    return fam


def all_equi_weyl(family: MaskFamily) -> bool:
    return bool(family.classes) and all(class_at_least(c, "equi_weyl") for c in family.classes)


def assemble_piecewise(parts: Sequence[Signal], family) -> tuple:
    """sum_j parts[j] chi_{T_j}; tail samples take parts[0] and are returned as a mask."""
    masks = family.masks if hasattr(family, "masks") else list(family)
    if len(parts) < len(masks):
        raise InvalidArgument("need at least one part per mask")
    grid = require_same_grid(*(p.grid for p in parts), *(m.grid for m in masks))
    out = np.array(parts[0].values, dtype=float)
    covered = np.zeros(grid.n, dtype=bool)
    for p, m in zip(parts, masks):
        out[m.bits] = p.values[m.bits]
        covered |= m.bits
    return parts[0].with_values(out), Mask(grid, ~covered)
