"""Nonlinear two-point boundary value problem for the feeder voltage profile.

On every segment the state (theta, v, s, w) obeys

    theta' = -s / v^2
    v'     = w
    s'     = (B p - G q) / (G^2 + B^2)
    w'     = s^2 / v^3 - (G p + B q) / (v (G^2 + B^2))

with theta = 0, v = 1 at the root and s = w = 0 at every leaf. At a junction
theta and v are continuous while s and w of the upstream segment equal the
sums over the downstream segments. A step voltage regulator with turn ratio n
imposes v(down) = n v(up), w(up) = n w(down) and continuity of theta and s.

:func:`solve_tpbv` discretizes all segments with the centered (box) scheme
and solves the resulting sparse system with damped Newton.
:func:`shooting_oracle` solves a single segment by an unrelated route
(closed-form quadrature for s, RK4 shooting on the initial gradient) and is
used to check the former.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .density import DensityProfile
from .errors import BracketFailure, GridMismatch, NonConvergence, VoltageCollapse
from .network import FeederNetwork, Grid, NodeKind, Segment, require_valid
from .profile import Profile

log = logging.getLogger(__name__)

TH, V, S, W = range(4)
FAMILIES = ("ode", "boundary", "junction", "svr")


@dataclass(frozen=True)
class SolveOptions:
    newton_tol: float = 1e-10
    max_iterations: int = 50
    damping: float = 1.0
    min_damping: float = 2.0 ** -20
    initial_guess: str = "first_order"  # or "flat"

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.initial_guess not in ("first_order", "flat"):
            raise ValueError(f"unknown initial_guess {self.initial_guess!r}")


def _check_grid(network: FeederNetwork, grid: Grid) -> None:
    if set(grid.segment_ids) != {s.id for s in network.segments}:
        raise GridMismatch("grid segments do not match the network")
    for sid in grid:
        if not np.isclose(grid.x[sid][-1], network.segment(sid).length, rtol=1e-12, atol=0):
            raise GridMismatch(f"grid for segment {sid!r} does not span its length")


def coefficients(network: FeederNetwork, grid: Grid, p, q):
    """Per-sample (B p - G q)/Y^2 and (G p + B q)/Y^2 for densities on ``grid``."""
    a = grid.zeros()
    c = grid.zeros()
    for sid in grid:
        seg = network.segment(sid)
        sl = grid.slice(sid)
        y2 = seg.admittance_sq
        a[sl] = (seg.B * p[sl] - seg.G * q[sl]) / y2
        c[sl] = (seg.G * p[sl] + seg.B * q[sl]) / y2
    return a, c


class _BoxSystem:
    """Residual and Jacobian of the discretized network problem.

    Unknown ``4*i + f`` is field ``f`` (theta, v, s, w) at flat sample ``i``.
    Rows: four box equations per interval, then four matching rows per
    segment (two at its upstream end, two at its downstream end).
    """

    def __init__(self, network: FeederNetwork, density: DensityProfile, grid: Grid):
        require_valid(network)
        _check_grid(network, grid)
        if density.grid != grid:
            raise GridMismatch("density is sampled on a different grid")
        self.network = network
        self.grid = grid
        self.n = grid.size
        self.a, self.c = coefficients(network, grid, density.p, density.q)

        left, hinv = [], []
        for sid in grid:
            i0, i1 = grid.first(sid), grid.last(sid)
            left.append(np.arange(i0, i1))
            hinv.append(np.full(i1 - i0, 1.0 / grid.h[sid]))
        self.left = np.concatenate(left)
        self.right = self.left + 1
        self.hinv = np.concatenate(hinv)
        self.n_ode = 4 * len(self.left)
        self._build_matching_rows()

    def _build_matching_rows(self):
        net, grid = self.network, self.grid
        rows, cols, vals, rhs, fam = [], [], [], [], []

        def row(terms, const, family):
            r = len(rhs)
            for col, val in terms:
                rows.append(r)
                cols.append(col)
                vals.append(val)
            rhs.append(const)
            fam.append(family)

        for sid in grid:
            seg = net.segment(sid)
            first, last = grid.first(sid), grid.last(sid)
            up = net.node(seg.upstream)
            if up.kind is NodeKind.ROOT:
                row([(4 * first + TH, 1.0)], 0.0, "boundary")
                row([(4 * first + V, 1.0)], 1.0, "boundary")
            else:
                parent = grid.last(net.upstream_of(up.id)[0].id)
                ratio = up.turn_ratio if up.kind is NodeKind.SVR else 1.0
                family = "svr" if up.kind is NodeKind.SVR else "junction"
                row([(4 * first + TH, 1.0), (4 * parent + TH, -1.0)], 0.0, family)
                row([(4 * first + V, 1.0), (4 * parent + V, -ratio)], 0.0, family)
            down = net.node(seg.downstream)
            if down.kind is NodeKind.LEAF:
                row([(4 * last + S, 1.0)], 0.0, "boundary")
                row([(4 * last + W, 1.0)], 0.0, "boundary")
            else:
                kids = [grid.first(k.id) for k in net.downstream_of(down.id)]
                ratio = down.turn_ratio if down.kind is NodeKind.SVR else 1.0
                family = "svr" if down.kind is NodeKind.SVR else "junction"
                row([(4 * last + S, 1.0)] + [(4 * k + S, -1.0) for k in kids], 0.0, family)
                row([(4 * last + W, 1.0)] + [(4 * k + W, -ratio) for k in kids], 0.0, family)

        self.match = sps.csr_matrix((vals, (rows, cols)), shape=(len(rhs), 4 * self.n))
        self.match_rhs = np.asarray(rhs)
        self.match_family = np.asarray(fam)

    def residual(self, u: np.ndarray) -> np.ndarray:
        U = u.reshape(self.n, 4)
        th, v, s, w = U.T
        a, c = self.a, self.c
        F = s * s / v ** 3 - c / v
        L, R, hi = self.left, self.right, self.hinv
        ode = np.empty((len(L), 4))
        ode[:, TH] = (th[R] - th[L]) * hi + 0.5 * (s[R] / v[R] ** 2 + s[L] / v[L] ** 2)
        ode[:, V] = (v[R] - v[L]) * hi - 0.5 * (w[R] + w[L])
        ode[:, S] = (s[R] - s[L]) * hi - 0.5 * (a[R] + a[L])
        ode[:, W] = (w[R] - w[L]) * hi - 0.5 * (F[R] + F[L])
        return np.concatenate([ode.ravel(), self.match @ u - self.match_rhs])

    def jacobian(self, u: np.ndarray) -> sps.csc_matrix:
        U = u.reshape(self.n, 4)
        v, s = U[:, V], U[:, S]
        c = self.c
        dF_dv = -3.0 * s * s / v ** 4 + c / v ** 2
        dF_ds = 2.0 * s / v ** 3
        m = len(self.left)
        base = 4 * np.arange(m)
        rows, cols, vals = [], [], []

        def put(field_row, idx, field_col, val):
            rows.append(base + field_row)
            cols.append(4 * idx + field_col)
            vals.append(np.broadcast_to(val, (m,)))

        hi = self.hinv
        for idx, sign in ((self.left, -1.0), (self.right, 1.0)):
            for f in range(4):
                put(f, idx, f, sign * hi)
            put(TH, idx, S, 0.5 / v[idx] ** 2)
            put(TH, idx, V, -s[idx] / v[idx] ** 3)
            put(V, idx, W, -0.5)
            put(W, idx, V, -0.5 * dF_dv[idx])
            put(W, idx, S, -0.5 * dF_ds[idx])
        ode = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_ode, 4 * self.n))
        return sps.vstack([ode, self.match], format="csc")

    def families(self, r: np.ndarray) -> dict[str, float]:
        out = {"ode": float(np.max(np.abs(r[:self.n_ode]), initial=0.0))}
        tail = np.abs(r[self.n_ode:])
        for fam in FAMILIES[1:]:
            out[fam] = float(np.max(tail[self.match_family == fam], initial=0.0))
        return out


def _pack(profile: Profile) -> np.ndarray:
    return profile.stacked().ravel()


def _unpack(grid: Grid, u: np.ndarray, info=None) -> Profile:
    U = u.reshape(grid.size, 4)
    return Profile(grid, U[:, TH].copy(), U[:, V].copy(), U[:, S].copy(), U[:, W].copy(),
                   info or {})


def _first_order_guess(network, density, grid) -> Profile | None:
    from .perturbation import assemble, expand

    series = expand(network, density, grid, order=1)
    guess = assemble(series, density.epsilon, 1)
    if np.all(guess.v > 0) and np.all(np.isfinite(guess.v)):
        return guess
    return None


def solve_tpbv(network: FeederNetwork, density: DensityProfile, grid: Grid,
               options: SolveOptions | None = None, initial: Profile | None = None) -> Profile:
    """Solve the nonlinear boundary value problem on the whole network.

    Raises :class:`NonConvergence` when Newton stalls or runs out of
    iterations and :class:`VoltageCollapse` when no damped step keeps v > 0.
    """
    options = options or SolveOptions()
    system = _BoxSystem(network, density, grid)

    start = "given"
    if initial is None:
        initial = None
        if options.initial_guess == "first_order":
            initial = _first_order_guess(network, density, grid)
            start = "first_order"
        if initial is None:
            initial = Profile.flat(grid)
            start = "flat"
    elif initial.grid != grid:
        raise GridMismatch("initial profile is on a different grid")
    u = _pack(initial)

    r = system.residual(u)
    history = []
    for it in range(options.max_iterations + 1):
        rmax = float(np.max(np.abs(r)))
        history.append(rmax)
        log.debug("newton iteration %d: residual %.3e", it, rmax)
        if not np.isfinite(rmax):
            raise NonConvergence(it, rmax, "residual became non-finite")
        if rmax <= options.newton_tol:
            info = {"iterations": it, "residual": rmax, "residuals": system.families(r),
                    "history": history, "initial_guess": start}
            return _unpack(grid, u, info)
        if it == options.max_iterations:
            break
        try:
            step = splu(system.jacobian(u)).solve(r)
        except RuntimeError as exc:
            raise NonConvergence(it, rmax, f"singular Newton matrix: {exc}") from exc
        lam = options.damping
        norm = np.linalg.norm(r)
        collapsed = False
        while lam >= options.min_damping:
            cand = u - lam * step
            vc = cand[V::4]
            if not (np.all(np.isfinite(cand)) and vc.min() > 0):
                collapsed = True
                lam *= 0.5
                continue
            rc = system.residual(cand)
            if np.linalg.norm(rc) < norm or np.max(np.abs(rc)) <= options.newton_tol:
                u, r = cand, rc
                break
            lam *= 0.5
        else:
            if collapsed:
                raise VoltageCollapse(f"every damped Newton step drives v <= 0 (iteration {it}, "
                                      f"residual {rmax:.3e})")
            raise NonConvergence(it, rmax, f"line search failed at iteration {it} "
                                           f"(residual {rmax:.3e})")
    raise NonConvergence(options.max_iterations, history[-1])


def residual(network: FeederNetwork, density: DensityProfile, grid: Grid,
             profile: Profile) -> dict[str, float]:
    """Max-norm residual of the discrete system, split into equation families."""
    if profile.grid != grid:
        raise GridMismatch("profile is on a different grid")
    system = _BoxSystem(network, density, grid)
    return system.families(system.residual(_pack(profile)))


# --- shooting oracle -----------------------------------------------------

def _shoot(h, s_n, s_m, c_n, c_m, eta, full=False):
    """Classical RK4 for (theta, v, w) from v(0)=1, w(0)=eta; eta may be an array.

    Trajectories that reach v <= 0 are poisoned with NaN.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    th = np.zeros_like(eta)
    v = np.ones_like(eta)
    w = eta.copy()
    n = len(s_n)
    if full:
        out = np.empty((n, 3, len(eta)))
        out[0] = th, v, w

    def rhs(s, c, v, w):
        bad = ~(v > 0)
        v = np.where(bad, np.nan, v)
        return -s / (v * v), w, s * s / v ** 3 - c / v

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for k in range(n - 1):
            k1 = rhs(s_n[k], c_n[k], v, w)
            k2 = rhs(s_m[k], c_m[k], v + 0.5 * h * k1[1], w + 0.5 * h * k1[2])
            k3 = rhs(s_m[k], c_m[k], v + 0.5 * h * k2[1], w + 0.5 * h * k2[2])
            k4 = rhs(s_n[k + 1], c_n[k + 1], v + h * k3[1], w + h * k3[2])
            th = th + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            v = v + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            w = w + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            v = np.where(v > 0, v, np.nan)
            if full:
                out[k + 1] = th, v, w
    return out if full else w


def shooting_oracle(segment: Segment, density: DensityProfile, grid: Grid, tol: float = 1e-12,
                    bracket=(-2.0, 2.0), n_scan: int = 401) -> Profile:
    """Single-segment solution by shooting on the initial voltage gradient.

    s is integrated in closed form from s(L) = 0. The initial gradient eta is
    found as the root of w(L; v(0)=1, w(0)=eta) closest to zero after a scan
    of ``bracket``; (theta, v, w) come from RK4 on the segment's grid.
    Raises :class:`BracketFailure` if the scan finds no sign change and
    :class:`VoltageCollapse` if every scanned trajectory reaches v <= 0.
    """
    sid = segment.id
    x = grid.x[sid]
    h = grid.h[sid]
    y2 = segment.admittance_sq
    mid = x[:-1] + 0.5 * h

    def s_at(xx):
        mp, mq = density.mass_to_end(sid, xx)
        return -(segment.B * mp - segment.G * mq) / y2

    def c_at(xx):
        p, q = density.evaluate(sid, xx)
        return (segment.G * p + segment.B * q) / y2

    s_n, s_m = s_at(x), s_at(mid)
    c_n, c_m = c_at(x), c_at(mid)

    def phi(eta):
        return float(_shoot(h, s_n, s_m, c_n, c_m, eta)[0])

    lo, hi = bracket
    if lo <= 0.0 <= hi and phi(0.0) == 0.0:
        eta = 0.0
    else:
        etas = np.union1d(np.linspace(lo, hi, n_scan), [0.0] if lo < 0 < hi else [])
        vals = _shoot(h, s_n, s_m, c_n, c_m, etas)
        ok = np.isfinite(vals)
        if not ok.any():
            raise VoltageCollapse(f"every shooting trajectory in {tuple(bracket)} reaches v <= 0")
        exact = np.flatnonzero(ok & (vals == 0.0))
        pairs = np.flatnonzero(ok[:-1] & ok[1:] & (np.sign(vals[:-1]) * np.sign(vals[1:]) < 0))
        if exact.size:
            eta = float(etas[exact[np.argmin(np.abs(etas[exact]))]])
        elif pairs.size:
            j = pairs[np.argmin(np.abs(etas[pairs] + etas[pairs + 1]))]
            eta = brentq(phi, etas[j], etas[j + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps,
                         maxiter=200)
        else:
            raise BracketFailure(bracket)

    traj = _shoot(h, s_n, s_m, c_n, c_m, eta, full=True)[:, :, 0]
    if not np.all(np.isfinite(traj)):
        raise VoltageCollapse("shooting trajectory reaches v <= 0")
    w_end = abs(traj[-1, 2])
    if w_end > tol:
        raise NonConvergence(0, w_end, f"shooting residual |w(L)| = {w_end:.3e} exceeds {tol:.1e}")
    sub = grid.subgrid([sid])
    return Profile(sub, traj[:, 0], traj[:, 1], s_n, traj[:, 2],
                   {"eta": eta, "w_end": w_end})
