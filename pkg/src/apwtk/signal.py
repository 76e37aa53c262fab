"""Sampled point-valued and set-valued signals on a uniform grid.

A signal lives on a finite window ``[t0, t0 + n*h)``.  Shifts never wrap
around the window: ``shift`` returns the shifted signal together with the
original restricted to the same overlap, and every consumer compares
those two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument
from .metric import Metric, as_pointset, hausdorff_batch

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class Grid:
    t0: float
    h: float
    n: int

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidArgument("grid step must be positive")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidArgument("grid needs at least two samples")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "n", int(self.n))

    @property
    def L(self) -> float:
        return self.n * self.h

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n)

    def steps(self, length: float, what: str = "length") -> int:
        """Convert a duration to a whole number of samples, or refuse."""
        m = length / self.h
        k = int(round(m))
        if abs(m - k) > 1e-9 * max(1.0, abs(m)):
            raise InvalidArgument(f"{what} {length} is not a multiple of the step {self.h}")
        return k

    def sub(self, start: int, count: int) -> "Grid":
        return Grid(self.t0 + start * self.h, self.h, count)

    def matches(self, other: "Grid") -> bool:
        scale = max(1.0, abs(self.t0), abs(other.t0), self.L)
        return (
            self.n == other.n
            and abs(self.h - other.h) <= _GRID_RTOL * self.h
            and abs(self.t0 - other.t0) <= _GRID_RTOL * scale
        )

    def to_dict(self) -> dict:
        return {"t0": self.t0, "h": self.h, "n": self.n}


def require_same_grid(*grids: Grid) -> Grid:
    first = grids[0]
    for g in grids[1:]:
        if not first.matches(g):
            raise InvalidArgument(f"grid mismatch: {first} vs {g}")
    return first


class Signal:
    """Point-valued samples ``values[i] = f(t0 + i*h)`` in R^d."""

    __slots__ = ("grid", "values", "metric")

    def __init__(self, grid: Grid, values, metric: Optional[Metric] = None):
        vals = np.array(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != grid.n:
            raise InvalidArgument(f"expected {grid.n} samples, got shape {vals.shape}")
        if np.isnan(vals).any():
            raise InvalidArgument("signal values must not be NaN")
        if metric is None:
            metric = Metric("euclidean", vals.shape[1])
        if metric.kind != "table" and metric.dimension != vals.shape[1]:
            raise InvalidArgument("metric dimension does not match the signal")
        vals.setflags(write=False)
        self.grid = grid
        self.values = vals
        self.metric = metric

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def scalar(self) -> np.ndarray:
        if self.dimension != 1:
            raise InvalidArgument("expected a scalar signal")
        return self.values[:, 0]

    def with_values(self, values, metric: Optional[Metric] = None) -> "Signal":
        return Signal(self.grid, values, metric or self.metric)

    def restrict(self, start: int, count: int) -> "Signal":
        return Signal(self.grid.sub(start, count), self.values[start:start + count], self.metric)

    def distances(self, other: "Signal", bounded: bool = False) -> np.ndarray:
        require_same_grid(self.grid, other.grid)
        return self.metric.distance(self.values, other.values, bounded=bounded)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.grid.matches(other.grid) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Signal({self.grid}, d={self.dimension})"


class SetValuedSignal:
    """Samples ``F(t)`` that are nonempty finite point sets.

    ``padded`` stacks all sets into an (n, kmax, d) array; short sets are
    padded with copies of their first member, which changes neither
    membership nor any Hausdorff distance.
    """

    __slots__ = ("grid", "sets", "metric", "padded", "sizes")

    def __init__(self, grid: Grid, sets: Sequence, metric: Optional[Metric] = None):
        if len(sets) != grid.n:
            raise InvalidArgument(f"expected {grid.n} sets, got {len(sets)}")
        sets = tuple(as_pointset(s) for s in sets)
        dims = {s.dimension for s in sets}
        if len(dims) != 1:
            raise InvalidArgument("all sets must share one dimension")
        d = dims.pop()
        if metric is None:
            metric = Metric("euclidean", d)
        sizes = np.array([len(s) for s in sets])
        kmax = int(sizes.max())
        padded = np.empty((grid.n, kmax, d))
        for i, s in enumerate(sets):
            padded[i, : len(s)] = s.points
            padded[i, len(s):] = s.points[0]
        padded.setflags(write=False)
        self.grid = grid
        self.sets = sets
        self.metric = metric
        self.padded = padded
        self.sizes = sizes

    @classmethod
    def from_branches(cls, branches: Sequence[Signal]) -> "SetValuedSignal":
        grid = require_same_grid(*(b.grid for b in branches))
        stacked = np.stack([b.values for b in branches], axis=1)
        return cls(grid, [stacked[i] for i in range(grid.n)], branches[0].metric)

    @property
    def dimension(self) -> int:
        return self.padded.shape[2]

    @property
    def n(self) -> int:
        return self.grid.n

    def restrict(self, start: int, count: int) -> "SetValuedSignal":
        return SetValuedSignal(self.grid.sub(start, count), self.sets[start:start + count], self.metric)

    def hausdorff_to(self, other: "SetValuedSignal", bounded: bool = False) -> np.ndarray:
        require_same_grid(self.grid, other.grid)
        return _hausdorff_padded(self.padded, other.padded, self.metric, bounded)

    def distances(self, other: "SetValuedSignal", bounded: bool = False) -> np.ndarray:
        return self.hausdorff_to(other, bounded=bounded)

    def point_distances(self, g: Signal) -> np.ndarray:
        """rho(g(t), F(t)) for every sample."""
        require_same_grid(self.grid, g.grid)
        return self.metric.distance(self.padded, g.values[:, None, :]).min(axis=1)

    def nearest_members(self, g) -> np.ndarray:
        """Member of F(t) nearest to g(t) per sample (lowest index wins ties)."""
        vals = g.values if isinstance(g, Signal) else np.asarray(g, dtype=float)
        d = self.metric.distance(self.padded, vals[:, None, :])
        idx = np.argmin(d, axis=1)
        return self.padded[np.arange(self.n), idx]

    def contains(self, values: np.ndarray) -> np.ndarray:
        """Exact membership test of ``values[i]`` in ``F(t_i)``."""
        return np.any(np.all(self.padded == values[:, None, :], axis=2), axis=1)

    def all_points(self) -> np.ndarray:
        return np.vstack([s.points for s in self.sets])


def _hausdorff_padded(a, b, metric, bounded, chunk=4096):
    out = np.empty(a.shape[0])
    for s in range(0, a.shape[0], chunk):
        out[s:s + chunk] = hausdorff_batch(a[s:s + chunk], b[s:s + chunk], metric, bounded)
    return out


class Mask:
    """Boolean mask on a grid standing for a set T and its indicator."""

    __slots__ = ("grid", "bits")

    def __init__(self, grid: Grid, bits):
        b = np.array(bits, dtype=bool)
        if b.shape != (grid.n,):
            raise InvalidArgument(f"mask needs {grid.n} bits, got shape {b.shape}")
        b.setflags(write=False)
        self.grid = grid
        self.bits = b

    @classmethod
    def from_interval(cls, grid: Grid, start: float, stop: float, period: Optional[float] = None) -> "Mask":
        t = grid.times
        if period:
            t = np.mod(t - start, period) + start
        return cls(grid, (t >= start) & (t < stop))

    @classmethod
    def full(cls, grid: Grid) -> "Mask":
        return cls(grid, np.ones(grid.n, dtype=bool))

    @classmethod
    def empty(cls, grid: Grid) -> "Mask":
        return cls(grid, np.zeros(grid.n, dtype=bool))

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def fraction(self) -> float:
        return self.count / self.grid.n

    def indicator(self) -> Signal:
        return Signal(self.grid, self.bits.astype(float))

    def _check(self, other: "Mask"):
        require_same_grid(self.grid, other.grid)

    def __or__(self, other):
        self._check(other)
        return Mask(self.grid, self.bits | other.bits)

    def __and__(self, other):
        self._check(other)
        return Mask(self.grid, self.bits & other.bits)

    def __sub__(self, other):
        self._check(other)
        return Mask(self.grid, self.bits & ~other.bits)

    def __invert__(self):
        return Mask(self.grid, ~self.bits)

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.grid.matches(other.grid) and np.array_equal(self.bits, other.bits)

    def __le__(self, other):
        self._check(other)
        return bool(np.all(~self.bits | other.bits))

    def __repr__(self):
        return f"Mask({self.count}/{self.grid.n})"


# ---------------------------------------------------------------- generators


@dataclass(frozen=True)
class TrigTerm:
    """One term ``c * e^{i lam t}`` (kind="exp"), ``c sin(lam t)`` or ``c cos(lam t)``."""

    c: complex
    lam: float
    kind: str = "exp"


@dataclass(frozen=True)
class TrigPolynomial:
    terms: tuple
    complex_output: bool = False

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        z = np.zeros(len(t), dtype=complex)
        for term in self.terms:
            if term.kind == "exp":
                z += term.c * np.exp(1j * term.lam * t)
            elif term.kind == "sin":
                z += term.c * np.sin(term.lam * t)
            elif term.kind == "cos":
                z += term.c * np.cos(term.lam * t)
            else:
                raise InvalidArgument(f"unknown trig term kind {term.kind!r}")
        if self.complex_output:
            return np.column_stack([z.real, z.imag])
        return z.real[:, None]


@dataclass(frozen=True)
class PeriodicTemplate:
    """Repeats ``template`` (samples over one period) with nearest-sample lookup."""

    template: tuple
    period: float
    phase: float = 0.0

    def evaluate(self, t):
        tmpl = np.array(self.template, dtype=float)
        if tmpl.ndim == 1:
            tmpl = tmpl[:, None]
        # exact arithmetic on the sample index avoids float drift in mod()
        pos = np.mod(t - self.phase, self.period) / self.period * len(tmpl)
        idx = np.floor(pos + 1e-9).astype(int) % len(tmpl)
        return tmpl[idx]


@dataclass(frozen=True)
class LimitPeriodic:
    """sum_k a_k sin(2 pi t / (base_period * 2^k)) -- uniform limit of periodic sums."""

    amplitudes: tuple
    base_period: float

    def evaluate(self, t):
        out = np.zeros(len(t))
        for k, a in enumerate(self.amplitudes):
            out += a * np.sin(2 * np.pi * t / (self.base_period * 2 ** k))
        return out[:, None]


@dataclass(frozen=True)
class StepFunction:
    """Elementary function sum_j x_j chi_{T_j}; later pieces overwrite earlier ones."""

    pieces: tuple  # (Mask | (start, stop) | (start, stop, period), value)
    default: tuple = (0.0,)

    def evaluate_on(self, grid: Grid) -> np.ndarray:
        default = np.atleast_1d(np.asarray(self.default, dtype=float))
        d = max([default.size] + [np.atleast_1d(v).size for _, v in self.pieces])
        out = np.tile(np.broadcast_to(default, (d,)), (grid.n, 1)).astype(float)
        for where, value in self.pieces:
            mask = where if isinstance(where, Mask) else Mask.from_interval(grid, *where)
            out[mask.bits] = np.broadcast_to(np.atleast_1d(np.asarray(value, dtype=float)), (d,))
        return out


@dataclass(frozen=True)
class Spikes:
    """Zero signal with single-sample spikes ``height`` at the given times."""

    times: tuple
    heights: tuple

    def evaluate_on(self, grid: Grid) -> np.ndarray:
        out = np.zeros((grid.n, 1))
        for t, hgt in zip(self.times, self.heights):
            i = int(round((t - grid.t0) / grid.h))
            if 0 <= i < grid.n:
                out[i, 0] = hgt
        return out


@dataclass(frozen=True)
class Noisy:
    base: object
    sigma: float
    seed: int

    def evaluate_on(self, grid: Grid) -> np.ndarray:
        base = _evaluate(self.base, grid)
        rng = np.random.default_rng(np.uint64(self.seed))
        return base + self.sigma * rng.standard_normal(base.shape)


@dataclass(frozen=True)
class Sum:
    parts: tuple

    def evaluate_on(self, grid: Grid) -> np.ndarray:
        out = _evaluate(self.parts[0], grid)
        for p in self.parts[1:]:
            out = out + _evaluate(p, grid)
        return out


def _evaluate(spec, grid: Grid) -> np.ndarray:
    if hasattr(spec, "evaluate_on"):
        return spec.evaluate_on(grid)
    if hasattr(spec, "evaluate"):
        return spec.evaluate(grid.times)
    raise InvalidArgument(f"not a generator spec: {spec!r}")


def _is_empty(spec) -> bool:
    if spec is None:
        return True
    for attr in ("terms", "pieces", "parts", "times", "amplitudes", "template"):
        if hasattr(spec, attr) and len(getattr(spec, attr)) == 0:
            return True
    return False


def generate(spec, grid: Grid, metric: Optional[Metric] = None) -> Signal:
    if _is_empty(spec):
        raise InvalidArgument("empty generator spec")
    return Signal(grid, _evaluate(spec, grid), metric)


def trig(*terms, complex_output: bool = False) -> TrigPolynomial:
    """``trig((1, 2.0, 'sin'), (0.5, 3.0))`` -> TrigPolynomial."""
    return TrigPolynomial(tuple(t if isinstance(t, TrigTerm) else TrigTerm(*t) for t in terms), complex_output)


def spec_from_dict(d: dict):
    """Build a generator spec from its JSON form (used by the CLI)."""
    kind = d.get("kind")
    if kind == "trig":
        terms = []
        for t in d.get("terms", []):
            c = complex(t.get("re", t.get("c", 1.0)), t.get("im", 0.0))
            terms.append(TrigTerm(c, float(t["lambda"]), t.get("form", "exp")))
        return TrigPolynomial(tuple(terms), bool(d.get("complex", False)))
    if kind == "periodic":
        tmpl = np.array(d["template"], dtype=float)
        tmpl = tuple(tmpl.tolist()) if tmpl.ndim == 1 else tuple(map(tuple, tmpl.tolist()))
        return PeriodicTemplate(tmpl, float(d["period"]), float(d.get("phase", 0.0)))
    if kind == "limit_periodic":
        return LimitPeriodic(tuple(d["amplitudes"]), float(d["base_period"]))
    if kind == "step":
        pieces = tuple(
            ((p["start"], p["stop"]) + ((p["period"],) if p.get("period") else ()), tuple(np.atleast_1d(p["value"])))
            for p in d.get("pieces", [])
        )
        return StepFunction(pieces, tuple(np.atleast_1d(d.get("default", 0.0))))
    if kind == "spikes":
        return Spikes(tuple(d["times"]), tuple(d["heights"]))
    if kind == "noise":
        if "seed" not in d:
            raise InvalidArgument("noise generator requires an explicit seed")
        return Noisy(spec_from_dict(d["base"]), float(d["sigma"]), int(d["seed"]))
    if kind == "sum":
        return Sum(tuple(spec_from_dict(p) for p in d["parts"]))
    raise InvalidArgument(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------- shifts


@dataclass(frozen=True)
class Shifted:
    """``shifted(t) = f(t + tau)`` and ``base(t) = f(t)`` on the common overlap."""

    shifted: object
    base: object
    steps: int
    tau: float
    snap_error: float

    @property
    def overlap(self) -> float:
        return self.base.grid.L


def snap(tau: float, h: float) -> tuple[int, float]:
    k = int(round(tau / h))
    return k, k * h - tau


def shift(f, tau: float) -> Shifted:
    """Shift a Signal or SetValuedSignal by tau (snapped to the grid), without wrapping."""
    k, err = snap(tau, f.grid.h)
    n = f.grid.n
    if abs(k) >= n:
        raise InvalidArgument(f"shift {tau} leaves no overlap with a window of length {f.grid.L}")
    m = n - abs(k)
    if k >= 0:
        shifted = _rebuild(f, f.grid.sub(0, m), k, k + m)
        base = f.restrict(0, m)
    else:
        shifted = _rebuild(f, f.grid.sub(-k, m), 0, m)
        base = f.restrict(-k, m)
    return Shifted(shifted, base, k, tau, err)


def _rebuild(f, grid, a, b):
    if isinstance(f, Signal):
        return Signal(grid, f.values[a:b], f.metric)
    return SetValuedSignal(grid, f.sets[a:b], f.metric)


def shift_distance_series(f, k: int, bounded: bool = False) -> np.ndarray:
    """rho(f(t), f(t + k h)) over the overlap, for either signal type."""
    n = f.grid.n
    if abs(k) >= n:
        raise InvalidArgument("shift leaves no overlap")
    a, b = (k, 0) if k >= 0 else (0, -k)
    m = n - abs(k)
    if isinstance(f, Signal):
        return f.metric.distance(f.values[a:a + m], f.values[b:b + m], bounded=bounded)
    return _hausdorff_padded(f.padded[a:a + m], f.padded[b:b + m], f.metric, bounded)


# ---------------------------------------------------------------- pointwise maps


def truncate_fR(f: Signal, x0, R: float) -> Signal:
    """f_R(x0; t) = f(t) where rho(f(t), x0) <= R, else x0."""
    x0 = np.broadcast_to(np.atleast_1d(np.asarray(x0, dtype=float)), (f.dimension,))
    keep = f.metric.distance(f.values, x0) <= R
    return f.with_values(np.where(keep[:, None], f.values, x0))


def sgn_signal(f: Signal) -> tuple[Signal, Mask]:
    """Pointwise h/|h| (zero where h = 0) and the zero set of f."""
    norms = np.sqrt(np.sum(f.values ** 2, axis=1))
    zero = norms == 0
    safe = np.where(zero, 1.0, norms)
    out = np.where(zero[:, None], 0.0, f.values / safe[:, None])
    return Signal(f.grid, out), Mask(f.grid, zero)


class PointMap:
    """A (possibly time-dependent) map applied samplewise by ``compose``."""

    lipschitz: float = math.inf
    in_dim: Optional[int] = None
    out_metric: Optional[Metric] = None

    def __call__(self, values: np.ndarray, times: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Identity(PointMap):
    lipschitz = 1.0

    def __call__(self, values, times):
        return values


class Affine(PointMap):
    """x -> A x + b."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.in_dim = self.A.shape[1]
        self.lipschitz = float(np.linalg.norm(self.A, 2))

    def __call__(self, values, times):
        return values @ self.A.T + self.b


class ClampedPolynomial(PointMap):
    """Scalar polynomial applied to x clipped to [lo, hi] (uniformly continuous)."""

    def __init__(self, coeffs, lo: float, hi: float):
        self.poly = np.polynomial.Polynomial(coeffs)
        self.lo, self.hi = float(lo), float(hi)
        self.in_dim = 1
        xs = np.linspace(lo, hi, 1025)
        self.lipschitz = float(np.abs(self.poly.deriv()(xs)).max())

    def __call__(self, values, times):
        return self.poly(np.clip(values, self.lo, self.hi))


class DistanceToSet(PointMap):
    """x -> rho(x, S): a 1-Lipschitz scalar map."""

    lipschitz = 1.0

    def __init__(self, S, metric: Optional[Metric] = None):
        self.S = as_pointset(S)
        self.metric = metric or Metric("euclidean", self.S.dimension)
        self.in_dim = self.S.dimension

    def __call__(self, values, times):
        return self.metric.pairwise(values, self.S.points).min(axis=1)[:, None]


class TimeVarying(PointMap):
    """Wraps ``fn(values, times)``; the map applied at sample i may depend on t_i."""

    def __init__(self, fn: Callable, lipschitz: float = math.inf, in_dim: Optional[int] = None):
        self.fn = fn
        self.lipschitz = lipschitz
        self.in_dim = in_dim

    def __call__(self, values, times):
        return self.fn(values, times)


def compose(F: Union[PointMap, Callable], f: Signal, out_metric: Optional[Metric] = None) -> Signal:
    in_dim = getattr(F, "in_dim", None)
    if in_dim is not None and in_dim != f.dimension:
        raise InvalidArgument(f"map expects dimension {in_dim}, signal has {f.dimension}")
    if isinstance(F, PointMap):
        out = F(f.values, f.grid.times)
    else:
        out = F(f.values)
    out = np.asarray(out, dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    return Signal(f.grid, out, out_metric)
