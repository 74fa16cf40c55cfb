"""Profile differences, network-wide norms and series-vs-nonlinear reports."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.integrate import trapezoid

from .density import DensityProfile, split
from .errors import GridMismatch
from .network import FeederNetwork, Grid
from .nonlinear import SolveOptions, solve_tpbv
from .perturbation import ImpactSpec, assemble, ev_impact, expand
from .profile import Profile


@dataclass(frozen=True, eq=False)
class ProfileDiff:
    grid: Grid
    e_theta: np.ndarray
    e_v: np.ndarray
    e_s: np.ndarray
    e_w: np.ndarray


def diff(a: Profile, b: Profile) -> ProfileDiff:
    if a.grid != b.grid:
        raise GridMismatch("profiles live on different grids")
    return ProfileDiff(a.grid, a.theta - b.theta, a.v - b.v, a.s - b.s, a.w - b.w)


def l2_like(e: np.ndarray, grid: Grid) -> float:
    """sqrt of the trapezoidal integral of e^2 over all segments."""
    e = np.asarray(e, dtype=float)
    total = math.fsum(trapezoid(e[grid.slice(sid)] ** 2, grid.x[sid]) for sid in grid)
    return math.sqrt(total)


def linf_like(e: np.ndarray, grid: Grid) -> float:
    e = np.asarray(e, dtype=float)
    if e.shape != (grid.size,):
        raise GridMismatch(f"field has shape {e.shape}, grid has {grid.size} samples")
    return float(np.max(np.abs(e), initial=0.0))


@dataclass(frozen=True)
class ReportRow:
    order: int
    dw_root: float
    dv_far_leaf: float
    dtheta_far_leaf: float
    l2_v: float
    linf_v: float


def _probe_points(network: FeederNetwork, grid: Grid):
    """(first sample of the root segment leading to the far leaf, last sample of the far leaf)."""
    far = network.far_leaf_segment()
    head = network.path_to_root(far.id)[0]
    return grid.first(head.id), grid.last(far.id)


def convergence_report(network: FeederNetwork, density: DensityProfile, grid: Grid, orders,
                       rhs: str = "printed", options: SolveOptions | None = None,
                       reference: Profile | None = None) -> list[ReportRow]:
    """Absolute series-minus-nonlinear differences for each truncation order.

    dw is taken at the root end of the path to the farthest leaf, dv and
    dtheta at that leaf.
    """
    orders = list(orders)
    if reference is None:
        reference = solve_tpbv(network, density, grid, options)
    top = max(orders)
    series = expand(network, density, grid, top, rhs)
    i_root, i_leaf = _probe_points(network, grid)
    rows = []
    for n in orders:
        approx = assemble(series, density.epsilon, n, allow_partial=True)
        d = diff(approx, reference)
        rows.append(ReportRow(n, abs(float(d.e_w[i_root])), abs(float(d.e_v[i_leaf])),
                              abs(float(d.e_theta[i_leaf])), l2_like(d.e_v, grid),
                              linf_like(d.e_v, grid)))
    return rows


@dataclass(frozen=True)
class SweepRow:
    eps_ev_fraction: float
    dv_series: float
    dv_nonlinear: float
    error: float


def impact_sweep(network: FeederNetwork, density: DensityProfile, grid: Grid, fractions,
                 order: int = 4, rhs: str = "printed",
                 options: SolveOptions | None = None) -> list[SweepRow]:
    """Series impact estimate vs the nonlinear difference v(eps) - v(eps_load) at the far leaf."""
    fractions = [float(f) for f in fractions]
    for f in fractions:
        if not 0 <= f <= 1:
            raise ValueError(f"EV fraction {f} outside [0, 1]")
    series = expand(network, density, grid, order, rhs)
    full = solve_tpbv(network, density, grid, options)
    _, i_leaf = _probe_points(network, grid)
    rows = []
    for f in fractions:
        spec = ImpactSpec.from_fraction(density.epsilon, f, order)
        dv_series = float(ev_impact(series, spec).delta_v[i_leaf])
        if spec.eps_ev == 0:
            dv_nl = 0.0
        else:
            _, load_share = split(density, density.injections, spec.eps_ev, spec.eps_load)
            if spec.eps_load == 0:
                dv_nl = float(full.v[i_leaf] - 1.0)
            else:
                base = solve_tpbv(network, load_share, grid, options)
                dv_nl = float(full.v[i_leaf] - base.v[i_leaf])
        rows.append(SweepRow(f, dv_series, dv_nl, abs(dv_series - dv_nl)))
    return rows


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(rows[0])])
    for row in rows:
        writer.writerow([_fmt(v) for v in astuple(row)])
    return buf.getvalue()


def format_table(rows) -> str:
    """Human-readable aligned rendering of report rows."""
    if not rows:
        return ""
    names = [f.name for f in fields(rows[0])]
    cells = [[_fmt_short(v) for v in astuple(r)] for r in rows]
    widths = [max(len(n), *(len(c[i]) for c in cells)) for i, n in enumerate(names)]
    lines = ["  ".join(n.rjust(w) for n, w in zip(names, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _fmt_short(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)
