"""Regular perturbation series of the feeder profile in powers of epsilon.

With p = eps p~ and q = eps q~ the solution is expanded as

    theta = sum eps^n theta_n,   v = 1 + sum eps^n v_n,
    s     = sum eps^n s_n,       w = sum eps^n w_n,

and every order solves a *linear* initial value problem. s_n and w_n are
integrated from the leaves (where they vanish) towards the root; v_n and
theta_n from the root (where they vanish) towards the leaves. All
quadratures are composite trapezoidal on the solver grid.

Two right-hand-side sets are available:

``"printed"`` (default)
    The published order-1..4 systems and the order-n (v, w) recursion
    ``w_n' = -3 s_1^2 v_{n-2} + K v_{n-1}``. theta_n and s_n stop at order 4.
``"consistent"``
    The coefficients obtained by expanding 1/v, 1/v^2 and 1/v^3 as power
    series in eps to every order. All four fields exist at every order and
    the truncated sums converge to the nonlinear solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .density import DensityProfile
from .errors import GridMismatch, MissingLowerOrder
from .network import FeederNetwork, Grid, NodeKind
from .nonlinear import _check_grid, coefficients
from .profile import Profile

RHS_SCHEMES = ("printed", "consistent")
PRINTED_FULL_ORDER = 4


@dataclass(frozen=True, eq=False)
class OrderFields:
    """Fields of one perturbation order; ``theta``/``s`` are None for (v, w)-only orders."""

    n: int
    theta: np.ndarray | None
    v: np.ndarray
    s: np.ndarray | None
    w: np.ndarray


@dataclass(frozen=True, eq=False)
class PerturbationSeries:
    grid: Grid
    epsilon: float
    theta: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    s: tuple[np.ndarray, ...]
    w: tuple[np.ndarray, ...]
    rhs: str = "printed"

    @property
    def max_full_order(self) -> int:
        return len(self.theta)

    @property
    def max_vw_order(self) -> int:
        return len(self.v)

    def order(self, n: int) -> OrderFields:
        if not 1 <= n <= self.max_vw_order:
            raise MissingLowerOrder(f"order {n} not available (have 1..{self.max_vw_order})")
        full = n <= self.max_full_order
        return OrderFields(n, self.theta[n - 1] if full else None, self.v[n - 1],
                           self.s[n - 1] if full else None, self.w[n - 1])

    def extended(self, fields: OrderFields) -> "PerturbationSeries":
        if fields.n != self.max_vw_order + 1:
            raise ValueError(f"cannot append order {fields.n} after {self.max_vw_order}")
        full = fields.theta is not None and self.max_full_order == self.max_vw_order
        return PerturbationSeries(
            self.grid, self.epsilon,
            self.theta + ((fields.theta,) if full else ()),
            self.v + (fields.v,),
            self.s + ((fields.s,) if full else ()),
            self.w + (fields.w,),
            self.rhs)

    @classmethod
    def empty(cls, grid: Grid, epsilon: float, rhs: str = "printed") -> "PerturbationSeries":
        return cls(grid, epsilon, (), (), (), (), rhs)


# --- tree quadrature -----------------------------------------------------

def _from_leaves(network: FeederNetwork, grid: Grid, f: np.ndarray, svr_factor: bool) -> np.ndarray:
    """y' = f with y = 0 at leaves, y_up = sum y_down at junctions.

    Across a regulator the upstream end takes ``n * y_down`` when
    ``svr_factor`` is set, else ``y_down``.
    """
    out = grid.zeros()
    for seg in reversed(network.preorder()):
        sl = grid.slice(seg.id)
        node = network.node(seg.downstream)
        if node.kind is NodeKind.LEAF:
            end = 0.0
        else:
            end = math.fsum(out[grid.first(k.id)] for k in network.downstream_of(node.id))
            if node.kind is NodeKind.SVR and svr_factor:
                end *= node.turn_ratio
        cum = cumulative_trapezoid(f[sl], grid.x[seg.id], initial=0.0)
        out[sl] = end - (cum[-1] - cum)
    return out


def _from_root(network: FeederNetwork, grid: Grid, f: np.ndarray, svr_factor: bool) -> np.ndarray:
    """y' = f with y = 0 at the root and continuity at junctions.

    Across a regulator the downstream start takes ``n * y_up`` when
    ``svr_factor`` is set.
    """
    out = grid.zeros()
    for seg in network.preorder():
        sl = grid.slice(seg.id)
        node = network.node(seg.upstream)
        if node.kind is NodeKind.ROOT:
            start = 0.0
        else:
            start = out[grid.last(network.upstream_of(node.id)[0].id)]
            if node.kind is NodeKind.SVR and svr_factor:
                start *= node.turn_ratio
        out[sl] = start + cumulative_trapezoid(f[sl], grid.x[seg.id], initial=0.0)
    return out


def _power_coeffs(vs, alpha: float, kmax: int):
    """Coefficients c_0..c_kmax of (1 + sum_j eps^j v_j)^alpha."""
    out = [np.ones_like(vs[0]) if vs else 1.0]
    for k in range(1, kmax + 1):
        acc = 0.0
        for j in range(1, k + 1):
            acc = acc + ((alpha + 1.0) * j - k) * vs[j - 1] * out[k - j]
        out.append(acc / k)
    return out


def _prepare(n, network, density_tilde, grid, lower_orders, rhs, need_full):
    if rhs not in RHS_SCHEMES:
        raise ValueError(f"unknown rhs scheme {rhs!r}")
    _check_grid(network, grid)
    if density_tilde.grid != grid:
        raise GridMismatch("density is sampled on a different grid")
    if lower_orders is not None and lower_orders.grid != grid:
        raise GridMismatch("lower orders are on a different grid")
    have_vw = lower_orders.max_vw_order if lower_orders is not None else 0
    have_full = lower_orders.max_full_order if lower_orders is not None else 0
    if have_vw < n - 1 or have_full < min(need_full, n - 1):
        raise MissingLowerOrder(f"order {n} needs orders 1..{n - 1} "
                                f"(have v,w to {have_vw}, theta,s to {have_full})")
    a, c = coefficients(network, grid, density_tilde.p_tilde, density_tilde.q_tilde)
    return a, c


def solve_order(n: int, network: FeederNetwork, density_tilde: DensityProfile, grid: Grid,
                lower_orders: PerturbationSeries | None = None, rhs: str = "printed") -> OrderFields:
    """All four fields of order ``n`` given orders 1..n-1.

    Only the scaled densities ``p_tilde``/``q_tilde`` of ``density_tilde``
    are used. With ``rhs="printed"`` n is limited to 1..4.
    """
    if n < 1 or (rhs == "printed" and n > PRINTED_FULL_ORDER):
        raise ValueError(f"order {n} outside 1..{PRINTED_FULL_ORDER} for the printed system")
    a, K = _prepare(n, network, density_tilde, grid, lower_orders, rhs, need_full=1)
    v = lower_orders.v if lower_orders is not None else ()
    s1 = lower_orders.s[0] if n > 1 else None

    s_n = _from_leaves(network, grid, a if n == 1 else grid.zeros(), svr_factor=False)
    if n == 1:
        s1 = s_n

    if rhs == "printed":
        if n == 1:
            dw = -K
        elif n == 2:
            dw = s1 ** 2 + K * v[0]
        elif n == 3:
            dw = -3.0 * s1 ** 2 * v[0] + K * v[1]
        else:
            dw = -3.0 * s1 ** 2 * v[1] + K * v[2]
    else:
        dw = -K * _power_coeffs(v, -1.0, n - 1)[n - 1]
        if n >= 2:
            dw = dw + s1 ** 2 * _power_coeffs(v, -3.0, n - 2)[n - 2]
    w_n = _from_leaves(network, grid, dw, svr_factor=True)
    v_n = _from_root(network, grid, w_n, svr_factor=True)

    if rhs == "printed":
        if n == 1:
            dth = -s1
        elif n == 2:
            dth = 2.0 * v[0] * s1
        else:
            v1, v2 = v[0], v[1]
            third = 4.0 * v1 ** 2 * s1 + (2.0 * v2 + v1 ** 2) * s1
            if n == 3:
                dth = third
            else:
                v3 = v[2]
                dth = (-2.0 * v1 * third
                       - (2.0 * v2 + v1 ** 2) * 2.0 * v1 * s1
                       - 2.0 * (v3 + v1 * v2) * (-s1))
    else:
        dth = -s1 * _power_coeffs(v, -2.0, n - 1)[n - 1]
    th_n = _from_root(network, grid, dth, svr_factor=False)
    return OrderFields(n, th_n, v_n, s_n, w_n)


def solve_vw_order(n: int, network: FeederNetwork, density_tilde: DensityProfile, grid: Grid,
                   lower_orders: PerturbationSeries, rhs: str = "printed"):
    """(v_n, w_n) for n >= 3 from the general (v, w) recursion."""
    if n < 3:
        raise ValueError("the (v, w) recursion starts at order 3")
    _, K = _prepare(n, network, density_tilde, grid, lower_orders, rhs, need_full=1)
    v = lower_orders.v
    s1 = lower_orders.s[0]
    if rhs == "printed":
        dw = -3.0 * s1 ** 2 * v[n - 3] + K * v[n - 2]
    else:
        dw = (s1 ** 2 * _power_coeffs(v, -3.0, n - 2)[n - 2]
              - K * _power_coeffs(v, -1.0, n - 1)[n - 1])
    w_n = _from_leaves(network, grid, dw, svr_factor=True)
    v_n = _from_root(network, grid, w_n, svr_factor=True)
    return v_n, w_n


def expand(network: FeederNetwork, density: DensityProfile, grid: Grid, order: int = 4,
           rhs: str = "printed") -> PerturbationSeries:
    """Perturbation orders 1..``order`` for the scaled density of ``density``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    series = PerturbationSeries.empty(grid, density.epsilon, rhs)
    for n in range(1, order + 1):
        if rhs == "consistent" or n <= PRINTED_FULL_ORDER:
            fields = solve_order(n, network, density, grid, series, rhs)
        else:
            v_n, w_n = solve_vw_order(n, network, density, grid, series, rhs)
            fields = OrderFields(n, None, v_n, None, w_n)
        series = series.extended(fields)
    return series


def _truncated_sum(terms, epsilon, order):
    total = np.zeros_like(terms[0]) if terms else 0.0
    for n in range(min(order, len(terms)), 0, -1):
        total = total + epsilon ** n * terms[n - 1]
    return total


def assemble(series: PerturbationSeries, epsilon: float, order: int,
             allow_partial: bool = False) -> Profile:
    """Truncated series evaluated at ``epsilon``.

    theta and s exist only up to ``series.max_full_order``; asking for more
    raises unless ``allow_partial`` is set, in which case they are cut there.
    """
    if not 1 <= order <= series.max_vw_order:
        raise ValueError(f"order {order} outside 1..{series.max_vw_order}")
    if order > series.max_full_order and not allow_partial:
        raise ValueError(f"theta and s are available only up to order {series.max_full_order}; "
                         "pass allow_partial=True to truncate them there")
    grid = series.grid
    zero = grid.zeros()
    th = zero + _truncated_sum(series.theta, epsilon, order)
    s = zero + _truncated_sum(series.s, epsilon, order)
    v = 1.0 + _truncated_sum(series.v, epsilon, order)
    w = zero + _truncated_sum(series.w, epsilon, order)
    return Profile(grid, th, v, s, w, {"order": order, "epsilon": epsilon, "rhs": series.rhs})


# --- EV impact -------------------------------------------------------------

class ShareMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ImpactSpec:
    eps_ev: float
    eps_load: float
    order: int = 4

    def __post_init__(self):
        if self.eps_ev < 0 or self.eps_load < 0:
            raise ShareMismatch("epsilon shares must be non-negative")
        if self.order < 1:
            raise ValueError("order must be >= 1")

    @classmethod
    def from_fraction(cls, epsilon: float, fraction: float, order: int = 4) -> "ImpactSpec":
        if not 0 <= fraction <= 1:
            raise ShareMismatch(f"EV fraction {fraction} outside [0, 1]")
        eps_ev = fraction * epsilon
        return cls(eps_ev, epsilon - eps_ev, order)


@dataclass(frozen=True, eq=False)
class ImpactResult:
    grid: Grid
    delta_v: np.ndarray
    max_abs: float
    location_of_max: tuple[str, float]


def ev_impact(series: PerturbationSeries, spec: ImpactSpec) -> ImpactResult:
    """Voltage change attributable to the EV share, conditioned on the load share.

    Equals v_N(eps) - v_N(eps_load) for the series truncated at ``spec.order``,
    with the difference of powers written out binomially so no cancellation
    occurs: eps^n - eps_load^n = sum_k C(n, k) eps_ev^k eps_load^(n-k).
    """
    total = spec.eps_ev + spec.eps_load
    if not math.isclose(total, series.epsilon, rel_tol=1e-12, abs_tol=1e-300):
        raise ShareMismatch(f"eps_ev + eps_load = {total} but the series has epsilon = {series.epsilon}")
    if spec.order > series.max_vw_order:
        raise ValueError(f"order {spec.order} exceeds available order {series.max_vw_order}")
    grid = series.grid
    dv = grid.zeros()
    for n in range(spec.order, 0, -1):
        coef = math.fsum(math.comb(n, k) * spec.eps_ev ** k * spec.eps_load ** (n - k)
                         for k in range(1, n + 1))
        dv += coef * series.v[n - 1]
    i = int(np.argmax(np.abs(dv)))
    loc = _locate(grid, i)
    return ImpactResult(grid, dv, float(abs(dv[i])), loc)


def _locate(grid: Grid, i: int) -> tuple[str, float]:
    for sid in grid:
        sl = grid.slice(sid)
        if sl.start <= i < sl.stop:
            return sid, float(grid.x[sid][i - sl.start])
    raise IndexError(i)
