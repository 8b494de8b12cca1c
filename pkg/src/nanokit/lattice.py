"""Direct simulation of the diatomic chain and traveling-wave diagnostics.

Nondimensional equations: with ``r_j = y_{j+1} - y_j`` and
``F_j = -r_{j-1} - r_{j-1}^2 + r_j + r_j^2``,

    y_j'' = F_j        (odd j, unit mass)
    y_j'' = w F_j      (even j, mass 1/w)

A traveling wave ``y_j(t) = x_{1|2}(j - c t)`` turns these into the
advance-delay pair checked by :func:`advance_delay_residual`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigError, Instability

BOUNDARIES = ("free", "damped-sponge", "periodic")
MAX_DT = 0.01
BLOWUP = 1e6
FD_STEP = 1e-4


class TravelingProfile(Protocol):
    c: float

    def x1(self, tau): ...

    def x2(self, tau): ...


@dataclass
class FunctionProfile:
    """Traveling profile from two vectorized callables."""

    x1_fn: object
    x2_fn: object
    c: float

    def x1(self, tau):
        return np.asarray(self.x1_fn(np.asarray(tau, dtype=float)), dtype=float)

    def x2(self, tau):
        return np.asarray(self.x2_fn(np.asarray(tau, dtype=float)), dtype=float)


def core_profile(w: float, eps: float) -> FunctionProfile:
    """Pure tanh front shared by both species, without ripple.

    ``x = sqrt(3(w^2-w+1)) / sqrt(2w(1+w)) eps tanh(sqrt(c31/2) eps tau)``.
    """
    amp = np.sqrt(3.0 * (w * w - w + 1.0)) / np.sqrt(2.0 * w * (1.0 + w)) * eps
    c31 = 3.0 * (1.0 + w) ** 3 / (4.0 * w * (1.0 - w + w * w))
    k = np.sqrt(c31 / 2.0) * eps

    def x(tau):
        return amp * np.tanh(k * tau)

    return FunctionProfile(x, x, float(np.sqrt(2.0 * w / (1.0 + w) + eps * eps)))


@dataclass
class ChainState:
    """Positions and velocities of a finite chain.

    Site ``j = j0 + i`` is stored at array index ``i``; odd sites carry unit
    mass, even sites mass ``1/w``.
    """

    y: np.ndarray
    v: np.ndarray
    t: float = 0.0
    w: float = 2.0
    boundary: str = "free"
    j0: int = 0
    sponge_width: int = 40
    sponge_strength: float = 0.5

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.y.shape != self.v.shape or self.y.ndim != 1:
            raise ConfigError("y and v must be 1-d arrays of equal length")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.n_particles < 3:
            raise ConfigError("need at least 3 particles")
        if self.boundary == "periodic" and (self.n_particles % 2):
            raise ConfigError("periodic chains need an even number of sites")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.v))):
            raise ConfigError("non-finite chain state")

    @property
    def n_particles(self) -> int:
        return self.y.size

    @property
    def sites(self) -> np.ndarray:
        return self.j0 + np.arange(self.n_particles)

    @property
    def accel_factor(self) -> np.ndarray:
        return np.where(self.sites % 2 == 1, 1.0, self.w)

    @property
    def masses(self) -> np.ndarray:
        return 1.0 / self.accel_factor

    def damping(self) -> np.ndarray:
        """Per-site damping rate; nonzero only in the sponge layers."""
        n = self.n_particles
        gamma = np.zeros(n)
        if self.boundary == "damped-sponge":
            d = min(self.sponge_width, n // 2)
            ramp = self.sponge_strength * (np.arange(d, 0, -1) / d)
            gamma[:d] = ramp
            gamma[n - d :] = ramp[::-1]
        return gamma


def _spring_force(r, nonlinear):
    return r + r * r if nonlinear else r


def chain_rhs(state: ChainState, nonlinear: bool = True, y=None, v=None) -> np.ndarray:
    """Accelerations of all particles, including sponge damping."""
    y = state.y if y is None else y
    v = state.v if v is None else v
    if state.boundary == "periodic":
        r = np.roll(y, -1) - y
        f = _spring_force(r, nonlinear)
        F = f - np.roll(f, 1)
    else:
        f = _spring_force(np.diff(y), nonlinear)
        F = np.zeros_like(y)
        F[:-1] += f
        F[1:] -= f
    acc = state.accel_factor * F
    if state.boundary == "damped-sponge":
        acc = acc - state.damping() * v
    return acc


@dataclass
class Trajectory:
    times: np.ndarray
    y: np.ndarray
    v: np.ndarray
    final: ChainState = field(repr=False)
    sites: np.ndarray = field(repr=False, default=None)

    def write_csv(self, path):
        """Write rows ``t,j,y,v`` for every particle at every sample."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t", "j", "y", "v"])
            for k, t in enumerate(self.times):
                for j, yy, vv in zip(self.sites, self.y[k], self.v[k]):
                    out.writerow([f"{t:.17g}", int(j), f"{yy:.17g}", f"{vv:.17g}"])


def integrate(
    state: ChainState,
    dt: float,
    steps: int,
    sample_every: int | None = None,
    nonlinear: bool = True,
) -> Trajectory:
    """Fixed-step classical Runge-Kutta integration.

    Parameters
    ----------
    state : ChainState
        Initial state; not modified.
    dt : float
        Time step, at most 0.01.
    steps : int
        Number of steps.
    sample_every : int, optional
        Store every ``sample_every``-th step (default: first and last only).
    nonlinear : bool
        Drop the quadratic spring terms when False.

    Raises
    ------
    Instability
        If any displacement exceeds 1e6 in magnitude or becomes non-finite.
    """
    if not 0.0 < dt <= MAX_DT:
        raise ConfigError(f"dt must lie in (0, {MAX_DT}], got {dt}")
    if steps < 0:
        raise ConfigError("steps must be non-negative")
    every = sample_every or max(steps, 1)
    y = state.y.copy()
    v = state.v.copy()
    t = state.t
    times, ys, vs = [t], [y.copy()], [v.copy()]

    def acc(yy, vv):
        return chain_rhs(state, nonlinear, yy, vv)

    for n in range(1, steps + 1):
        k1y, k1v = v, acc(y, v)
        k2y, k2v = v + 0.5 * dt * k1v, acc(y + 0.5 * dt * k1y, v + 0.5 * dt * k1v)
        k3y, k3v = v + 0.5 * dt * k2v, acc(y + 0.5 * dt * k2y, v + 0.5 * dt * k2v)
        k4y, k4v = v + dt * k3v, acc(y + dt * k3y, v + dt * k3v)
        y = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t = state.t + n * dt
        # NaN fails the comparison as well
        if not np.max(np.abs(y)) <= BLOWUP:
            raise Instability(f"displacement blew up at t={t:.4g}")
        if n % every == 0 or n == steps:
            if times[-1] != t:
                times.append(t)
                ys.append(y.copy())
                vs.append(v.copy())
    final = replace(state, y=y, v=v, t=t)
    return Trajectory(np.array(times), np.array(ys), np.array(vs), final, state.sites)


def hamiltonian(state: ChainState, nonlinear: bool = True) -> float:
    """Kinetic energy plus spring energy ``sum r^2/2 + r^3/3``."""
    if state.boundary == "periodic":
        r = np.roll(state.y, -1) - state.y
    else:
        r = np.diff(state.y)
    pot = 0.5 * r * r + (r**3 / 3.0 if nonlinear else 0.0)
    return float(0.5 * np.sum(state.masses * state.v**2) + np.sum(pot))


def dispersion_frequencies(q, w: float) -> tuple[np.ndarray, np.ndarray]:
    """Acoustic and optical branches ``omega^2 = (1+w) -+ sqrt((1+w)^2 - 4 w sin^2 q)``."""
    q = np.asarray(q, dtype=float)
    disc = np.sqrt((1.0 + w) ** 2 - 4.0 * w * np.sin(q) ** 2)
    return np.sqrt(np.maximum((1.0 + w) - disc, 0.0)), np.sqrt((1.0 + w) + disc)


def profile_state(
    p: TravelingProfile,
    n: int = 2048,
    launch: int = 512,
    w: float = 2.0,
    boundary: str = "damped-sponge",
    j0: int = 0,
) -> ChainState:
    """Chain state sampling a traveling profile centred at site ``launch``."""
    sites = j0 + np.arange(n)
    tau = (sites - launch).astype(float)
    odd = sites % 2 == 1
    y = np.where(odd, p.x1(tau), p.x2(tau))
    dx1 = derivative(p.x1, tau)
    dx2 = derivative(p.x2, tau)
    v = -p.c * np.where(odd, dx1, dx2)
    return ChainState(y, v, 0.0, w, boundary, j0)


def derivative(f, tau, h: float = FD_STEP, order: int = 1) -> np.ndarray:
    """Central difference of order 1 or 2 with one Richardson refinement."""
    tau = np.asarray(tau, dtype=float)

    def d(step):
        if order == 1:
            return (f(tau + step) - f(tau - step)) / (2.0 * step)
        return (f(tau + step) - 2.0 * f(tau) + f(tau - step)) / step**2

    return (4.0 * d(h / 2.0) - d(h)) / 3.0


def advance_delay_residual(p: TravelingProfile, tau_samples, w: float, h: float = FD_STEP) -> dict:
    """Residuals of both advance-delay equations along ``tau_samples``.

    Returns
    -------
    dict
        ``r1``, ``r2`` arrays and their ``linf`` / ``l2`` norms (the L2 norm
        uses the sample spacing as weight when samples are uniform).
    """
    tau = np.asarray(tau_samples, dtype=float)
    c2 = p.c**2
    x1, x2 = p.x1(tau), p.x2(tau)
    x1p, x1m = p.x1(tau + 1.0), p.x1(tau - 1.0)
    x2p, x2m = p.x2(tau + 1.0), p.x2(tau - 1.0)
    dd1 = derivative(p.x1, tau, h, order=2)
    dd2 = derivative(p.x2, tau, h, order=2)
    r1 = c2 * dd1 - (x2p - 2.0 * x1 + x2m + (x2p - x1) ** 2 - (x1 - x2m) ** 2)
    r2 = c2 / w * dd2 - (x1p - 2.0 * x2 + x1m + (x1p - x2) ** 2 - (x2 - x1m) ** 2)
    spacing = np.diff(tau)
    weight = spacing[0] if spacing.size and np.allclose(spacing, spacing[0]) else 1.0
    return {
        "r1": r1,
        "r2": r2,
        "linf1": float(np.max(np.abs(r1))),
        "linf2": float(np.max(np.abs(r2))),
        "l2_1": float(np.sqrt(weight * np.sum(r1**2))),
        "l2_2": float(np.sqrt(weight * np.sum(r2**2))),
        "linf": float(max(np.max(np.abs(r1)), np.max(np.abs(r2)))),
    }


def first_integral(p: TravelingProfile, tau: float, w: float, n_s: int = 401, h: float = FD_STEP) -> float:
    """Conserved quantity of the advance-delay system at ``tau``.

    ``c^2 x1' + (c^2/w) x2' - int_{-1}^0 [d + d^2] ds - int_{-1}^0 [e + e^2] ds``
    with ``d = x2(tau+s+1) - x1(tau+s)`` and ``e = x1(tau+s+1) - x2(tau+s)``.
    """
    c2 = p.c**2
    t = np.array([float(tau)])
    dx1 = derivative(p.x1, t, h)[0]
    dx2 = derivative(p.x2, t, h)[0]
    s = np.linspace(-1.0, 0.0, n_s)
    d = p.x2(tau + s + 1.0) - p.x1(tau + s)
    e = p.x1(tau + s + 1.0) - p.x2(tau + s)
    return float(c2 * dx1 + c2 / w * dx2 - simpson(d + d * d, x=s) - simpson(e + e * e, x=s))


def core_position(y: np.ndarray, sites: np.ndarray, halfwidth: int = 60) -> float:
    """Strain-weighted centroid of the solitary core.

    Uses ``r_j^2`` in a window around the strain maximum, with the bond
    ``(j, j+1)`` located at ``j + 1/2``.
    """
    r = np.diff(np.asarray(y, dtype=float))
    k = int(np.argmax(np.abs(r)))
    lo, hi = max(k - halfwidth, 0), min(k + halfwidth + 1, r.size)
    wgt = r[lo:hi] ** 2
    pos = sites[lo:hi] + 0.5
    return float(np.sum(wgt * pos) / np.sum(wgt))


def measure_speed(traj: Trajectory, halfwidth: int = 60) -> float:
    """Least-squares speed of the core centroid over the sampled times."""
    if traj.times.size < 2:
        raise ConfigError("need at least two samples to measure a speed")
    x = [core_position(y, traj.sites, halfwidth) for y in traj.y]
    return float(np.polyfit(traj.times, x, 1)[0])
