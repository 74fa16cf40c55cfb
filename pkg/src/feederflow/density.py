"""Scaled power densities built from point injections.

Point injections (loads, EV stations) are smeared into Gaussian bumps so the
density is continuous. Sign convention: positive power flows *into* the
feeder (generation, discharging); consumption and EV charging are negative.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.integrate import trapezoid
from scipy.special import erf

from .network import FeederNetwork, Grid


class Category(enum.Enum):
    EV = "ev"
    LOAD = "load"


@dataclass(frozen=True)
class PointInjection:
    segment: str
    xi: float
    P: float
    Q: float = 0.0
    category: Category = Category.LOAD


@dataclass(frozen=True)
class CoarseGrainSpec:
    sigma: float = 0.05
    truncation_radius: float = 8.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.truncation_radius >= 5:
            raise ValueError(f"truncation_radius must be >= 5, got {self.truncation_radius}")


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """Grid samples of the scaled densities p~ and q~ together with epsilon.

    The physical density is ``epsilon * p_tilde``. When built by
    :func:`coarse_grain` the profile remembers its injections so it can be
    evaluated (and integrated) off-grid exactly; otherwise a cubic spline
    through the samples is used.
    """

    grid: Grid
    p_tilde: np.ndarray
    q_tilde: np.ndarray
    epsilon: float
    injections: tuple[PointInjection, ...] | None = None
    spec: CoarseGrainSpec | None = None
    # p_tilde == source_scale * (sum of injection kernels) when injections are kept
    source_scale: float = 1.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        for name in ("p_tilde", "q_tilde"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.size,):
                raise ValueError(f"{name} has shape {arr.shape}, grid has {self.grid.size} samples")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite samples")
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> np.ndarray:
        return self.epsilon * self.p_tilde

    @property
    def q(self) -> np.ndarray:
        return self.epsilon * self.q_tilde

    def with_epsilon(self, epsilon: float) -> "DensityProfile":
        """Same physical density expressed with a different epsilon."""
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        scale = self.epsilon / epsilon
        return replace(self, p_tilde=self.p_tilde * scale, q_tilde=self.q_tilde * scale,
                       epsilon=epsilon, source_scale=self.source_scale * scale)

    def scaled(self, factor: float) -> "DensityProfile":
        """Physical density multiplied by ``factor`` (epsilon scaled, shape kept)."""
        return replace(self, epsilon=self.epsilon * factor)

    # off-grid evaluation, used by the shooting oracle ---------------------
    def _segment_injections(self, sid):
        return [inj for inj in self.injections if inj.segment == sid]

    def evaluate(self, sid: str, x) -> tuple[np.ndarray, np.ndarray]:
        """Physical (p, q) on segment ``sid`` at arbitrary local abscissae."""
        x = np.asarray(x, dtype=float)
        if self.injections is not None:
            p = np.zeros_like(x)
            q = np.zeros_like(x)
            cut = self.spec.truncation_radius * self.spec.sigma
            for inj in self._segment_injections(sid):
                k = _kernel(x - inj.xi, self.spec.sigma, cut)
                p += inj.P * k
                q += inj.Q * k
            f = self.epsilon * self.source_scale
            return f * p, f * q
        sl = self.grid.slice(sid)
        xs = self.grid.x[sid]
        return (CubicSpline(xs, self.p[sl])(x), CubicSpline(xs, self.q[sl])(x))

    def mass_to_end(self, sid: str, x) -> tuple[np.ndarray, np.ndarray]:
        """Physical (int_x^L p, int_x^L q) on segment ``sid``."""
        x = np.asarray(x, dtype=float)
        length = self.grid.x[sid][-1]
        if self.injections is not None:
            mp = np.zeros_like(x)
            mq = np.zeros_like(x)
            cut = self.spec.truncation_radius * self.spec.sigma
            s2 = math.sqrt(2.0) * self.spec.sigma
            for inj in self._segment_injections(sid):
                lo = np.clip(x - inj.xi, -cut, cut)
                hi = min(max(length - inj.xi, -cut), cut)
                frac = 0.5 * (erf(hi / s2) - erf(lo / s2))
                mp += inj.P * frac
                mq += inj.Q * frac
            f = self.epsilon * self.source_scale
            return f * mp, f * mq
        sl = self.grid.slice(sid)
        xs = self.grid.x[sid]
        out = []
        for f in (self.p[sl], self.q[sl]):
            anti = CubicSpline(xs, f).antiderivative()
            out.append(anti(length) - anti(x))
        return out[0], out[1]


def _kernel(d, sigma, cut):
    k = np.exp(-0.5 * (d / sigma) ** 2) / math.sqrt(2.0 * math.pi * sigma * sigma)
    return np.where(np.abs(d) <= cut, k, 0.0)


def check_injections(network: FeederNetwork, injections) -> None:
    for inj in injections:
        try:
            seg = network.segment(inj.segment)
        except KeyError:
            raise ValueError(f"injection on unknown segment {inj.segment!r}") from None
        if not 0 < inj.xi < seg.length:
            raise ValueError(f"injection at xi={inj.xi} km outside (0, {seg.length}) "
                             f"on segment {inj.segment!r}")


def coarse_grain(injections, spec: CoarseGrainSpec, grid: Grid, epsilon: float) -> DensityProfile:
    """Gaussian-smeared densities sampled on ``grid``, expressed relative to ``epsilon``.

    Each injection contributes ``P/sqrt(2 pi sigma^2) exp(-(x - xi)^2 / (2 sigma^2))``
    on its own segment only, truncated at ``truncation_radius * sigma`` and
    not renormalized.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    injections = tuple(injections)
    for inj in injections:
        if inj.segment not in grid.x:
            raise ValueError(f"injection on unknown segment {inj.segment!r}")
        length = grid.x[inj.segment][-1]
        if not 0 < inj.xi < length:
            raise ValueError(f"injection at xi={inj.xi} km outside (0, {length}) on {inj.segment!r}")
    hmax = max(grid.h.values())
    if spec.sigma < 2 * hmax:
        raise ValueError(f"sigma={spec.sigma} km under-resolved by grid spacing {hmax} km "
                         "(need sigma >= 2h)")
    p = grid.zeros()
    q = grid.zeros()
    cut = spec.truncation_radius * spec.sigma
    for inj in injections:
        sl = grid.slice(inj.segment)
        k = _kernel(grid.x[inj.segment] - inj.xi, spec.sigma, cut)
        p[sl] += inj.P * k
        q[sl] += inj.Q * k
    return DensityProfile(grid, p / epsilon, q / epsilon, epsilon, injections, spec, 1.0 / epsilon)


def split(profile: DensityProfile, injections, eps_ev: float, eps_load: float):
    """Split epsilon into EV and load shares.

    Both returned profiles keep the common shape ``p_tilde``/``q_tilde`` and
    carry ``eps_ev`` and ``eps_load`` as their magnitudes. ``injections`` is
    accepted for symmetry with :func:`coarse_grain`; the split scales the
    shared shape and does not separate injections by category.
    """
    if eps_ev < 0 or eps_load < 0:
        raise ValueError("epsilon shares must be non-negative")
    if not math.isclose(eps_ev + eps_load, profile.epsilon, rel_tol=1e-12, abs_tol=1e-300):
        raise ValueError(f"eps_ev + eps_load = {eps_ev + eps_load} != epsilon = {profile.epsilon}")
    return replace(profile, epsilon=eps_ev), replace(profile, epsilon=eps_load)


def total_mass(profile: DensityProfile) -> tuple[float, float]:
    """Trapezoidal integral of the physical densities over the whole network."""
    grid = profile.grid
    mp = mq = 0.0
    for sid in grid:
        sl = grid.slice(sid)
        mp += trapezoid(profile.p[sl], grid.x[sid])
        mq += trapezoid(profile.q[sl], grid.x[sid])
    return float(mp), float(mq)
