"""Command bodies shared by the CLI and in-process callers.

Every ``run_*`` returns ``{filename: text}``; the CLI only writes the
files.  Reports never contain timings or paths, so equal inputs give
equal bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import decomposition, fourier, selection
from .almost_periodicity import APQuery, scan_almost_periods
from .errors import InvalidArgument
from .metric import Metric
from .seminorms import WindowLadder, d_pl, j_p, weyl_seminorm
from .serialize import dumps, fmt, masks_to_csv_text, set_signal_to_csv_text, signal_to_csv_text
from .signal import Grid, SetValuedSignal, Signal, generate, spec_from_dict


def parse_grid(text: str) -> Grid:
    try:
        t0, h, n = text.split(",")
        return Grid(float(t0), float(h), int(n))
    except ValueError:
        raise InvalidArgument(f"--grid expects t0,h,n, got {text!r}") from None


def parse_floats(text: Optional[str]) -> Optional[tuple]:
    if text is None:
        return None
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InvalidArgument(f"expected comma-separated numbers, got {text!r}") from None


def load_spec(text: str) -> dict:
    """Inline JSON or a path to a JSON file."""
    src = text
    if not text.lstrip().startswith("{"):
        try:
            src = Path(text).read_text()
        except OSError as exc:
            raise InvalidArgument(f"cannot read generator spec {text}: {exc.strerror}") from None
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"invalid generator spec JSON: {exc}") from None


def _seeded(d, seed: Optional[int]):
    if isinstance(d, dict):
        out = {k: _seeded(v, seed) for k, v in d.items()}
        if out.get("kind") == "noise" and "seed" not in out:
            if seed is None:
                raise InvalidArgument("stochastic generators need --seed or an explicit seed")
            out["seed"] = seed
        return out
    if isinstance(d, list):
        return [_seeded(v, seed) for v in d]
    return d


# ---------------------------------------------------------------- gen


def run_gen(spec: dict, grid: Grid, metric: str = "euclidean", seed: Optional[int] = None, name: str = "signal") -> dict:
    spec = _seeded(spec, seed)
    if spec.get("kind") == "branches":
        branches = [generate(spec_from_dict(b), grid) for b in spec.get("branches", [])]
        if not branches:
            raise InvalidArgument("set-valued generator spec needs at least one branch")
        m = Metric(metric, branches[0].dimension)
        F = SetValuedSignal.from_branches([b.with_values(b.values, m) for b in branches])
        return {f"{name}.csv": set_signal_to_csv_text(F)}
    f = generate(spec_from_dict(spec), grid)
    return {f"{name}.csv": signal_to_csv_text(f)}


# ---------------------------------------------------------------- analyze


def default_ladder(grid: Grid) -> tuple:
    m = max(1, int(round(grid.L / 16 / grid.h)))  # snap the shortest window to the grid
    return WindowLadder.geometric(grid, m * grid.h, grid.L / 2).lengths


def default_query(grid: Grid, eps: float, p: float, ladder: tuple, tau_range=None, tau_step=None) -> APQuery:
    l = ladder[0]
    tau_range = (0.0, grid.L / 2) if tau_range is None else tau_range
    if tau_step is None:
        tau_step = grid.h * max(1, grid.n // 2000)
    return APQuery(eps, l, tuple(tau_range), tau_step, p, ladder=ladder)


def run_analyze(
    f: Signal,
    p: float = 1.0,
    ladder: Optional[tuple] = None,
    eps: float = 0.1,
    deltas: tuple = (0.1, 0.01),
    tau_range: Optional[tuple] = None,
    tau_step: Optional[float] = None,
    lambda_range: Optional[tuple] = None,
    top_k: int = 16,
    floor: float = 1e-3,
    jp_tolerance: float = 0.05,
) -> dict:
    grid = f.grid
    ladder = default_ladder(grid) if ladder is None else tuple(ladder)
    q = default_query(grid, eps, p, ladder, tau_range, tau_step)
    hi = min(10.0, math.pi / (4 * grid.h))
    lam = (-hi, hi) if lambda_range is None else tuple(lambda_range)
    complex_pairs = False
    table = fourier.scan_exponents(f, lam, top_k=top_k, floor=floor, complex_pairs=complex_pairs)
    ap = scan_almost_periods(f, q)
    report = {
        "grid": grid.to_dict(),
        "metric": f.metric.to_dict(),
        "seminorms": {
            "d_pl": [{"l": l, "value": d_pl(f, None, p, l)} for l in ladder],
            "weyl_norm": weyl_seminorm(f, None, p, ladder).to_dict(),
        },
        "j_p": j_p(f, None, p, deltas, ladder, jp_tolerance).to_dict(),
        "almost_periods": ap.to_dict(),
        "class": ap.cls,
        "fourier": table.to_dict(),
    }
    return {"report.json": dumps(report)}


# ---------------------------------------------------------------- decompose


def run_decompose(
    f: Signal,
    eps: float,
    b: Optional[float] = None,
    depth: int = 2,
    tail_budget: Optional[float] = None,
    class_eps: float = 0.25,
    ladder: Optional[tuple] = None,
    tau_step: Optional[float] = None,
) -> dict:
    grid = f.grid
    ladder = default_ladder(grid) if ladder is None else tuple(ladder)
    q = default_query(grid, class_eps, 1.0, ladder, None, tau_step)
    fam = decomposition.decompose(f, eps, b=b, depth=depth, tail_budget=tail_budget, classify=q)
    # the samplewise inequality is asserted inside decompose; repeat it for the record
    worst = max(
        (float(f.metric.distance(f.values[m.bits], c).max()) for m, c in zip(fam.masks, fam.centers)),
        default=0.0,
    )
    d = fam.to_dict()
    d["max_center_distance"] = worst
    d["all_equi_weyl"] = decomposition.all_equi_weyl(fam)
    return {"family.json": dumps(d), "masks.csv": masks_to_csv_text(grid, fam.masks, fam.labels())}


# ---------------------------------------------------------------- select


def _selections_csv(grid: Grid, sels: list) -> str:
    lines = ["t," + ",".join(f"f{j + 1}_v{i + 1}" for j, s in enumerate(sels) for i in range(s.dimension))]
    vals = np.concatenate([s.values for s in sels], axis=1)
    for t, row in zip(grid.times, vals):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def _plot_csv(F: SetValuedSignal, g: Signal, f: Signal) -> str:
    r = F.point_distances(g)
    dfg = f.metric.distance(f.values, g.values)
    lines = ["t,rho_g_F,rho_f_g"]
    for t, a, b in zip(F.grid.times, r, dfg):
        lines.append(f"{fmt(t)},{fmt(a)},{fmt(b)}")
    return "\n".join(lines) + "\n"


def run_select(
    F: SetValuedSignal,
    g: Optional[Signal] = None,
    mode: str = "eps",
    eps: float = 0.1,
    depth: int = 3,
    b: Optional[float] = None,
    eta: Optional[str] = None,
    maxlevel: int = 4,
    n: int = 2,
    eps_prime: Optional[float] = None,
    count: int = 2,
    eps_ladder: tuple = (0.5, 0.25),
    plot: bool = False,
) -> dict:
    out = {}
    if mode in ("eps", "modulus"):
        if g is None:
            raise InvalidArgument(f"mode {mode} needs a target signal (--input)")
        if mode == "eps":
            rep = selection.select_eps(F, g, eps, depth, b)
        else:
            rep = selection.select_modulus(F, g, selection.Modulus.parse(eta or "linear,1"), maxlevel, depth, b)
        d = rep.to_dict(embed_csv=True)
        d["mode"] = mode
        out["selection.json"] = dumps(d)
        out["selection.csv"] = signal_to_csv_text(rep.selection)
        if plot:
            out["plot.csv"] = _plot_csv(F, g, rep.selection)
        return out
    if mode == "net":
        eps_prime = 1.1 * eps if eps_prime is None else eps_prime
        reps = selection.select_eps_net(F, n, eps, eps_prime, b)
        body = {"mode": mode, "eps": eps, "eps_prime": eps_prime, "selections": [r.to_dict(False) for r in reps]}
    elif mode == "dense":
        fam = selection.dense_family(F, count, eps_ladder, depth, b)
        reps = fam.reports
        body = {
            "mode": mode,
            "anchors": fam.anchors,
            "coverage_defect": fam.coverage_defect,
            "selections": [r.to_dict(False) for r in reps],
        }
    else:
        raise InvalidArgument(f"unknown selection mode {mode!r}")
    out["selection.json"] = dumps(body)
    out["selection.csv"] = _selections_csv(F.grid, [r.selection for r in reps])
    return out
