"""Generalized homoclinic of the reduced system and the lattice wave it encodes.

The solution is sought on ``tau >= 0`` as

    X(tau) = H(tau) + Z(tau) + zeta(tau) X_p(tau - theta)

with ``H`` the explicit homoclinic, ``X_p`` the small periodic orbit and
``zeta`` a cutoff switching the ripple on for ``tau >= 2``.  The
correction ``Z`` is the fixed point of a variation-of-constants operator
built from the fundamental solutions about ``H``; the phase ``theta``
is chosen so the half-line solution matches its reversed image at 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, make_interp_spline

from .dispersion import DimerParams
from .errors import ArcsinDomain, ConfigError, JumpTooLarge, NoContraction, TailTooFat
from .periodic import PeriodicOrbit, solve_periodic
from .reduced import (
    FundamentalSet,
    HomoclinicH,
    NormalFormConstants,
    Remainder,
    ReducedSystem,
    constants,
    dominant_jacobian,
    reverser,
)


class Cutoff:
    """Even quintic-smoothstep cutoff: 0 on ``|tau| <= 1``, 1 on ``|tau| >= 2``."""

    def __call__(self, tau):
        x = np.clip(np.abs(np.asarray(tau, dtype=float)) - 1.0, 0.0, 1.0)
        return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)

    def derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        x = np.clip(np.abs(tau) - 1.0, 0.0, 1.0)
        return np.sign(tau) * 30.0 * x * x * (1.0 - x) ** 2


@dataclass
class SolverOptions:
    """Numerical settings; ``None`` entries take the defaults derived from ``eps``."""

    K: int = 7
    h: float | None = None
    T: float | None = None
    rho: float = 1.0
    max_iter: int = 200
    z_tol: float = 1e-12
    theta_tol: float = 1e-14
    max_theta_iter: int = 60
    phase_tol: float = 1e-10
    jump_tol: float = 1e-9
    tail_fraction: float = 1e-3
    eps_max: float = 0.15
    stall_limit: int = 5
    component_mask: tuple | None = None


@dataclass
class CorrectionZ:
    """Correction on the half-line grid.

    ``values[i, n]`` is component ``i`` of ``(Z1, Z2, Z3, Z4, conj Z4)`` at
    ``tau[n]``.
    """

    tau: np.ndarray
    values: np.ndarray
    nu: float
    iterations: int = 0
    ratios: list = field(default_factory=list)
    diffs: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    tail: float = 0.0

    @property
    def weighted_norm(self) -> float:
        return weighted_norm(self.values, self.tau, self.nu)

    @property
    def contraction_ratio(self) -> float:
        """Largest ratio of successive Picard differences (0 if fewer than two)."""
        return float(max(self.ratios)) if self.ratios else 0.0


def weighted_norm(values: np.ndarray, tau: np.ndarray, nu: float) -> float:
    """``sum_i sup_tau e^{nu tau} |Z_i(tau)|``."""
    return float(np.sum(np.max(np.abs(values) * np.exp(nu * tau), axis=1)))


class SolveContext:
    """Everything the fixed-point and phase solves need, precomputed on the grid."""

    def __init__(
        self,
        params: DimerParams,
        k: NormalFormConstants | None = None,
        remainder: Remainder | None = None,
        options: SolverOptions | None = None,
    ):
        self.params = params
        self.options = options or SolverOptions()
        opt = self.options
        eps = params.eps
        if eps > opt.eps_max:
            raise ConfigError(f"eps={eps} exceeds eps_max={opt.eps_max}")
        self.eps = eps
        self.k = k if k is not None else constants(params.w)
        self.system = ReducedSystem(eps, self.k, remainder)
        self.H = HomoclinicH(eps, self.k)
        self.fund = FundamentalSet(eps, self.k)
        self.cutoff = Cutoff()
        self.I = params.I
        self.orbit: PeriodicOrbit = solve_periodic(eps, self.I, opt.K, self.k, remainder)

        kappa = self.H.decay_rate
        self.nu = 0.75 * kappa
        T = opt.T if opt.T is not None else 25.0 / kappa
        h = opt.h if opt.h is not None else min(2.0 * np.pi / (24.0 * self.k.s0), 0.02 / kappa)
        n = int(np.ceil(T / h))
        n += n % 2  # even number of intervals
        self.tau = np.linspace(0.0, T, n + 1)
        self.T = T
        self.h = self.tau[1]
        self.radius = opt.rho * eps ** (11.0 / 3.0)

        tau = self.tau
        self.Hg = self.H(tau)
        self.FH = self.system.dominant(self.Hg)
        self.JH = dominant_jacobian(self.Hg, eps, self.k)
        self.zeta = self.cutoff(tau)
        self.dzeta = self.cutoff.derivative(tau)
        self.sol = self.fund.solutions(tau)
        self.adj_conj = np.conj(self.fund.adjoints(tau))
        self.mask = None if opt.component_mask is None else np.asarray(opt.component_mask, dtype=float)[:, None]
        self._sol_weight = np.max(np.abs(self.sol) * np.exp(self.nu * tau), axis=2).sum(axis=1)

    def ripple(self, theta: float, tau=None):
        tau = self.tau if tau is None else tau
        return self.orbit(tau, theta)

    def zero(self) -> CorrectionZ:
        return CorrectionZ(self.tau, np.zeros((5, self.tau.size), dtype=complex), self.nu)


def nonlinearity_N(tau, Z, ctx: SolveContext, theta: float) -> np.ndarray:
    """Residual nonlinearity driving the correction.

    ``G(H + Z + zeta Xp) - F(H) - zeta G(Xp) - dF(H) Z - zeta' Xp`` where
    ``G`` is the configured truncation and ``F`` its dominant part.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    Z = np.asarray(Z, dtype=complex).reshape(5, -1)
    Hv = ctx.H(tau)
    zeta = ctx.cutoff(tau)
    dzeta = ctx.cutoff.derivative(tau)
    Xp = ctx.ripple(theta, tau)
    J = dominant_jacobian(Hv, ctx.eps, ctx.k)
    return _nonlinearity(ctx, Hv, ctx.system.dominant(Hv), J, zeta, dzeta, Xp, Z)


def _nonlinearity(ctx, Hv, FH, J, zeta, dzeta, Xp, Z):
    # the linear parts cancel identically; only nonlinear pieces are formed so
    # that the small far-field residual is not lost to rounding
    sys = ctx.system
    c32 = ctx.k.c32
    out = sys.nonlinear(Hv + Z + zeta * Xp) - zeta * sys.nonlinear(Xp) - dzeta * Xp
    if not ctx.k.is_dominant:
        out = out + (ctx.k.e31 * ctx.eps**2) * _rotation(Hv + Z)
    h1, h2 = Hv[0], Hv[1]
    out[1] = out[1] + c32 * h1 * h1 + 2.0 * c32 * h1 * Z[0]
    out[2] = out[2] + c32 * h1 * h2 + c32 * (h1 * Z[1] + h2 * Z[0])
    if ctx.mask is not None:
        out = out * ctx.mask
    return out


def _rotation(Y):
    # frequency-shift part of the linear field not contained in dF(H)
    zero = np.zeros_like(Y[0])
    return np.stack([zero, zero, zero, 1j * Y[3], -1j * Y[4]])


def _projections(ctx: SolveContext, N: np.ndarray) -> np.ndarray:
    """``g[k, n] = <N(tau_n), s_k*(tau_n)>``."""
    return np.einsum("in,kin->kn", N, ctx.adj_conj)


def _cumulative(g: np.ndarray, h: float) -> np.ndarray:
    # running Simpson integral along the last axis, complex-safe
    return cumulative_simpson(g.real, dx=h, initial=0.0, axis=-1) + 1j * cumulative_simpson(
        g.imag, dx=h, initial=0.0, axis=-1
    )


def _tail(ctx: SolveContext, g: np.ndarray):
    """Exponential-tail estimate of ``int_T^inf g`` for each projection.

    Returns (estimate, bound) arrays, one entry per row of ``g``.  The envelope decay rate
    is measured from the last two windows of the grid.
    """
    tau = ctx.tau
    L = min(ctx.T / 5.0, 4.0 * 2.0 * np.pi / ctx.k.s0)
    a = (tau >= ctx.T - 2 * L) & (tau < ctx.T - L)
    b = tau >= ctx.T - L
    m = g.shape[0]
    est = np.zeros(m, dtype=complex)
    bound = np.zeros(m)
    tb = tau[b]
    for k in range(m):
        env_a = np.max(np.abs(g[k, a]))
        gb = np.abs(g[k, b])
        env_b = np.max(gb)
        if env_b == 0.0:
            continue
        if env_a <= env_b:
            est[k] = np.inf
            bound[k] = np.inf
            continue
        beta = np.log(env_a / env_b) / L
        # envelope carried from its peak in the last window to T
        env_T = env_b * np.exp(-beta * (ctx.T - tb[np.argmax(gb)]))
        est[k] = g[k, -1] / beta
        bound[k] = env_T / beta
    return est, bound


def apply_A(Z: CorrectionZ, ctx: SolveContext, theta: float = 0.0, check_tail: bool = True) -> CorrectionZ:
    """One application of the variation-of-constants operator.

    ``A[Z] = int_0^tau <N, s1*> s1 - sum_{k>=2} int_tau^inf <N, sk*> sk``

    Raises
    ------
    TailTooFat
        If the estimated contribution of ``int_T^inf`` exceeds
        ``tail_fraction`` of the weighted norm of the result.
    """
    Xp = ctx.ripple(theta)
    N = _nonlinearity(ctx, ctx.Hg, ctx.FH, ctx.JH, ctx.zeta, ctx.dzeta, Xp, Z.values)
    g = _projections(ctx, N)
    est, bound = _tail(ctx, g)
    coef = np.empty_like(g)
    coef[0] = _cumulative(g[0], ctx.h)
    # integrate the decaying projections from the right end so that values
    # near T keep full relative accuracy under the e^{nu tau} weight
    tail_est = np.where(np.isfinite(est), est, 0.0)
    coef[1:] = -(_cumulative(g[1:, ::-1], ctx.h)[:, ::-1] + tail_est[1:, None])
    values = np.einsum("kn,kin->in", coef, ctx.sol)
    out = CorrectionZ(ctx.tau, values, ctx.nu)
    tail_weight = float(np.sum(bound[1:] * ctx._sol_weight[1:]))
    out.tail = tail_weight
    if check_tail:
        norm = out.weighted_norm
        if not np.isfinite(tail_weight) or (norm > 0 and tail_weight > ctx.options.tail_fraction * norm):
            raise TailTooFat(f"tail contribution {tail_weight:.3e} vs norm {norm:.3e}")
    return out


def solve_Z(ctx: SolveContext, theta: float = 0.0) -> CorrectionZ:
    """Picard iteration ``Z <- A[Z]`` from zero.

    Stops when the weighted difference of successive iterates falls below
    ``z_tol * eps^4``.

    Raises
    ------
    NoContraction
        If successive differences fail to shrink for ``stall_limit``
        consecutive iterations, or the iteration cap is reached.
    """
    opt = ctx.options
    target = opt.z_tol * ctx.eps**4
    Z = ctx.zero()
    diffs, ratios, norms = [], [], []
    stall = 0
    for it in range(1, opt.max_iter + 1):
        Zn = apply_A(Z, ctx, theta)
        d = weighted_norm(Zn.values - Z.values, ctx.tau, ctx.nu)
        diffs.append(d)
        norms.append(Zn.weighted_norm)
        if len(diffs) > 1 and diffs[-2] > 0:
            r = d / diffs[-2]
            ratios.append(r)
            stall = stall + 1 if r >= 1.0 else 0
            if stall >= opt.stall_limit:
                raise NoContraction(f"difference ratio >= 1 for {stall} iterations (eps={ctx.eps})")
        Z = Zn
        if d <= target:
            break
    else:
        raise NoContraction(f"no convergence in {opt.max_iter} iterations (last diff {diffs[-1]:.3e})")
    Z.iterations = it
    Z.diffs = diffs
    Z.ratios = ratios
    Z.norms = norms
    return Z


def phase_integral(ctx: SolveContext, Z: CorrectionZ, theta: float) -> float:
    """``int_0^inf Re(N4 e^{-i s0 t}) dt``; its vanishing closes the jump at 0."""
    Xp = ctx.ripple(theta)
    N = _nonlinearity(ctx, ctx.Hg, ctx.FH, ctx.JH, ctx.zeta, ctx.dzeta, Xp, Z.values)
    g = _projections(ctx, N)[3].real
    est, _ = _tail(ctx, g[None, :])
    tail = est[0].real if np.isfinite(est[0]) else 0.0
    return float(cumulative_simpson(g, dx=ctx.h)[-1] + tail)


@dataclass
class PhaseSolution:
    theta: float
    Z: CorrectionZ
    iterations: int
    phase_residual: float
    history: list = field(default_factory=list)


def solve_theta(ctx: SolveContext) -> PhaseSolution:
    """Nested fixed point for the ripple phase.

    For each candidate ``theta`` the correction is re-solved; the update
    is ``theta <- arcsin(Theta~ / I) / s0`` with
    ``Theta~ = J4(theta) + I sin(s0 theta)``.

    Raises
    ------
    ArcsinDomain
        If ``|Theta~ / I| > 1``.
    """
    opt = ctx.options
    I = ctx.I
    s0 = ctx.k.s0
    if I == 0.0:
        Z = solve_Z(ctx, 0.0)
        return PhaseSolution(0.0, Z, 0, phase_integral(ctx, Z, 0.0))
    theta = 0.0
    history = []
    for it in range(1, opt.max_theta_iter + 1):
        Z = solve_Z(ctx, theta)
        J4 = phase_integral(ctx, Z, theta)
        history.append((theta, J4))
        ratio = (J4 + I * np.sin(s0 * theta)) / I
        if abs(ratio) > 1.0:
            raise ArcsinDomain(f"|Theta/I| = {abs(ratio):.3f} > 1; increase I0")
        new = float(np.arcsin(ratio) / s0)
        if abs(new - theta) <= opt.theta_tol and abs(J4) <= opt.phase_tol * I:
            theta = new
            break
        theta = new
    else:
        raise ArcsinDomain(f"phase iteration did not settle in {opt.max_theta_iter} steps")
    Z = solve_Z(ctx, theta)
    return PhaseSolution(theta, Z, it, phase_integral(ctx, Z, theta), history)


class WaveAssembly:
    """Reversible generalized homoclinic on the whole line.

    For ``tau >= 0`` the state is ``H + Z + zeta Xp(tau - theta)``; for
    ``tau < 0`` it is ``S X(-tau)``.
    """

    def __init__(self, ctx: SolveContext, Z: CorrectionZ, theta: float):
        self.ctx = ctx
        self.H = ctx.H
        self.Z = Z
        self.orbit = ctx.orbit
        self.theta = float(theta)
        # Z alone inherits the C2 seams of the cutoff; Z + zeta Xp = X - H is smooth
        self._wspline = make_interp_spline(ctx.tau, Z.values + ctx.zeta * ctx.ripple(theta), k=5, axis=1)
        # u1 pieces not available in closed form, integrated once on the grid
        u2p = ctx.ripple(theta)[0]
        g = (Z.values[0] + (ctx.zeta - 1.0) * u2p).real
        self._u1_extra = CubicSpline(ctx.tau, cumulative_simpson(g, dx=ctx.h, initial=0.0))
        self._u1p0 = float(self.orbit.u1(0.0, self.theta)[0])
        self.jump = self.matching_defect()

    def _half(self, tau):
        tau = np.asarray(tau, dtype=float)
        inside = tau <= self.ctx.T
        out = self._wspline(np.minimum(tau, self.ctx.T))
        if not np.all(inside):
            out[:, ~inside] = self.orbit(tau[~inside], self.theta)
        return self.H(tau) + out

    def __call__(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.empty((5, tau.size), dtype=complex)
        pos = tau >= 0
        out[:, pos] = self._half(tau[pos])
        if np.any(~pos):
            out[:, ~pos] = reverser(self._half(-tau[~pos]))
        return out

    def matching_defect(self) -> np.ndarray:
        """Components of ``(I - S) X(0)``."""
        X0 = self._half(np.array([0.0]))
        return (X0 - reverser(X0))[:, 0]

    def u1(self, tau) -> np.ndarray:
        """Odd companion ``u1`` with ``u1' = u2`` and ``u1(0) = 0``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        a = np.abs(tau)
        H = self.H
        core = H.amplitude / H.rate * np.tanh(H.rate * a)
        extra = self._u1_extra(np.minimum(a, self.ctx.T))
        ripple = self.orbit.u1(a, self.theta) - self._u1p0
        return np.sign(tau) * (core + extra + ripple)

    def u1_core(self, tau) -> np.ndarray:
        H = self.H
        return H.amplitude / H.rate * np.tanh(H.rate * np.asarray(tau, dtype=float))

    def far_field_constant(self, tau=None) -> float:
        """Measured ``M`` in ``|X - H - Xp(. - theta)| <= M eps^3 e^{-(3/4) kappa tau}`` for ``tau >= 2``."""
        ctx = self.ctx
        if tau is None:
            tau = ctx.tau[ctx.tau >= 2.0]
        dev = np.max(np.abs(self._half(tau) - self.H(tau) - self.orbit(tau, self.theta)), axis=0)
        return float(np.max(dev * np.exp(ctx.nu * tau)) / ctx.eps**3)


def assemble(ctx: SolveContext, Z: CorrectionZ, theta: float) -> WaveAssembly:
    """Build the whole-line wave and check the matching at 0.

    Raises
    ------
    JumpTooLarge
        If ``|(I - S) X(0)|`` exceeds ``jump_tol``.
    """
    wave = WaveAssembly(ctx, Z, theta)
    jump = float(np.max(np.abs(wave.jump)))
    if jump > ctx.options.jump_tol:
        raise JumpTooLarge(f"matching defect {jump:.3e} at tau=0")
    return wave


class LatticeProfile:
    """Traveling-wave coordinates ``x1``, ``x2`` reconstructed from a wave.

    ``x1 = u1 + 2 cos(s0) Re u5`` and ``x2 = u1 + a u3 + 2 b Re u5`` with
    ``a = (w-1)/(2(1+w))`` and ``b = (1+w-s0^2 w)/(1+w)``, the position
    components of the basis vectors.
    """

    def __init__(self, wave: WaveAssembly, params: DimerParams):
        self.wave = wave
        self.params = params
        self.c = params.c
        w = params.w
        s0 = wave.ctx.k.s0
        self.a = (w - 1.0) / (2.0 * (1.0 + w))
        self.b = (1.0 + w - s0**2 * w) / (1.0 + w)
        self.cos_s0 = np.cos(s0)

    def _parts(self, tau):
        X = self.wave(tau)
        return self.wave.u1(tau), X

    def x1(self, tau):
        u1, X = self._parts(tau)
        return u1 + 2.0 * self.cos_s0 * X[3].real

    def x2(self, tau):
        u1, X = self._parts(tau)
        return u1 + self.a * X[1].real + 2.0 * self.b * X[3].real

    @property
    def ripple_amplitudes(self) -> tuple[float, float]:
        """Synthesized far-field ripple amplitudes of ``x1`` and ``x2``."""
        I = self.wave.orbit.I
        return 2.0 * I * abs(self.cos_s0), 2.0 * I * abs(self.b)

    def positions(self, j, t, ks: float = 1.0, bs: float = 1.0, m1: float = 1.0, ls: float = 0.0, y0: float = 0.0):
        """Dimensional particle positions ``(ks/bs) x(j - c sqrt(ks/m1) t) + j ls + y0``."""
        j = np.asarray(j)
        arg = j - self.c * np.sqrt(ks / m1) * np.asarray(t, dtype=float)
        x = np.where(j % 2 == 1, self.x1(arg.ravel()).reshape(arg.shape), self.x2(arg.ravel()).reshape(arg.shape))
        return ks / bs * x + j * ls + y0


def reconstruct_lattice(assembly: WaveAssembly, params: DimerParams) -> LatticeProfile:
    return LatticeProfile(assembly, params)


@dataclass
class Construction:
    ctx: SolveContext
    phase: PhaseSolution
    wave: WaveAssembly
    profile: LatticeProfile

    @property
    def theta(self) -> float:
        return self.phase.theta

    @property
    def Z(self) -> CorrectionZ:
        return self.phase.Z

    def summary(self) -> dict:
        ctx = self.ctx
        p = ctx.params
        Z = self.Z
        return {
            "w": p.w,
            "eps": p.eps,
            "I0": p.I0,
            "I": p.I,
            "c": p.c,
            "c_sq": p.c_sq,
            "s0": ctx.k.s0,
            "c31": ctx.k.c31,
            "c32": ctx.k.c32,
            "theta": self.theta,
            "rtilde": ctx.orbit.rtilde,
            "Z_norm": Z.weighted_norm,
            "Z_norm_over_eps4": Z.weighted_norm / p.eps**4,
            "ball_radius": ctx.radius,
            "in_ball": bool(Z.weighted_norm <= ctx.radius),
            "z_iterations": Z.iterations,
            "theta_iterations": self.phase.iterations,
            "contraction_ratio": Z.contraction_ratio,
            "phase_residual": self.phase.phase_residual,
            "jump": float(np.max(np.abs(self.wave.jump))),
            "orbit_residual": ctx.orbit.residual,
            "grid_h": ctx.h,
            "grid_T": ctx.T,
            "K": ctx.orbit.K,
        }


def construct(
    params: DimerParams,
    k: NormalFormConstants | None = None,
    remainder: Remainder | None = None,
    options: SolverOptions | None = None,
) -> Construction:
    """Full pipeline: periodic orbit, phase and correction solve, assembly, reconstruction."""
    ctx = SolveContext(params, k, remainder, options)
    phase = solve_theta(ctx)
    wave = assemble(ctx, phase.Z, phase.theta)
    return Construction(ctx, phase, wave, reconstruct_lattice(wave, params))
