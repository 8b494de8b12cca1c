"""Characteristic function of the linearized traveling-wave operator.

The function

    N(lam, c) = c^4 lam^4 + 2 c^2 (1 + w) lam^2 + 2 w (1 - cosh(2 lam))

vanishes exactly at the eigenvalues of the linearization of the diatomic
advance-delay system at wave speed ``c``.  This module evaluates it,
locates the resonant frequency ``s0`` at the sonic speed and follows the
two eigenvalue branches that move when ``c^2 = c0^2 + eps^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NoBracket, NoConvergence, Overflow

COSH_LIMIT = 300.0
RESIDUAL_TOL = 1e-12
SIMPLICITY_TOL = 1e-6
IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class DimerParams:
    """Parameter block of the mass dimer problem.

    Parameters
    ----------
    w : float
        Mass ratio m1/m2, must exceed 1.
    eps : float
        Speed perturbation, ``c^2 = c0^2 + eps^2``.
    I0 : float
        Ripple scale; the ripple amplitude is ``I = eps^4 * I0``.
    """

    w: float
    eps: float
    I0: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.w) or self.w <= 1.0:
            raise ConfigError(f"mass ratio w must be > 1, got {self.w}")
        if not np.isfinite(self.eps) or self.eps <= 0.0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")
        if not np.isfinite(self.I0) or self.I0 < 0.0:
            raise ConfigError(f"I0 must be >= 0, got {self.I0}")

    @property
    def c0_sq(self) -> float:
        return sonic_speed_sq(self.w)

    @property
    def c_sq(self) -> float:
        return self.c0_sq + self.eps**2

    @property
    def c(self) -> float:
        return float(np.sqrt(self.c_sq))

    @property
    def I(self) -> float:
        return self.eps**4 * self.I0


@dataclass(frozen=True)
class SpectralData:
    s0: float
    lambda0: float
    s1_eps: float
    w: float
    c_sq: float
    Ntilde_at: Callable = field(repr=False, compare=False, default=None)


def sonic_speed_sq(w: float) -> float:
    return 2.0 * w / (1.0 + w)


def char_function(lam, c_sq: float, w: float, order: int = 0):
    """Evaluate the characteristic function or one of its lambda-derivatives.

    Parameters
    ----------
    lam : complex or array_like
        Spectral parameter.
    c_sq : float
        Squared wave speed.
    w : float
        Mass ratio.
    order : int
        Derivative order in ``lam``, 0 to 4.

    Returns
    -------
    complex or ndarray
        Same shape as ``lam``.

    Raises
    ------
    Overflow
        If ``|Re lam| > 300`` where cosh would saturate.
    """
    lam = np.asarray(lam, dtype=complex)
    if np.any(np.abs(lam.real) > COSH_LIMIT):
        raise Overflow(f"|Re lambda| exceeds {COSH_LIMIT}")
    c4 = c_sq * c_sq
    a = 2.0 * c_sq * (1.0 + w)
    if order == 0:
        out = c4 * lam**4 + a * lam**2 + 2.0 * w * (1.0 - np.cosh(2.0 * lam))
    elif order == 1:
        out = 4.0 * c4 * lam**3 + 2.0 * a * lam - 4.0 * w * np.sinh(2.0 * lam)
    elif order == 2:
        out = 12.0 * c4 * lam**2 + 2.0 * a - 8.0 * w * np.cosh(2.0 * lam)
    elif order == 3:
        out = 24.0 * c4 * lam - 16.0 * w * np.sinh(2.0 * lam)
    elif order == 4:
        out = 24.0 * c4 - 32.0 * w * np.cosh(2.0 * lam)
    else:
        raise ValueError(f"derivative order must be 0..4, got {order}")
    return out[()] if out.ndim == 0 else out


def char_derivative(lam, c_sq: float, w: float):
    """Analytic first derivative of :func:`char_function` in ``lam``."""
    return char_function(lam, c_sq, w, order=1)


def _imag_axis(q, c_sq, w):
    # N(iq, c) is real: c^4 q^4 - 2c^2(1+w) q^2 + 4 w sin^2 q
    return c_sq**2 * q**4 - 2.0 * c_sq * (1.0 + w) * q**2 + 4.0 * w * np.sin(q) ** 2


def _imag_axis_dq(q, c_sq, w):
    return 4.0 * c_sq**2 * q**3 - 4.0 * c_sq * (1.0 + w) * q + 4.0 * w * np.sin(2.0 * q)


def resonance_identity(s0: float, w: float) -> float:
    """Residual of w(s0^2-(1+w)/w)(s0^2-1-w) - (1+w)^2 cos^2 s0."""
    return w * (s0**2 - (1.0 + w) / w) * (s0**2 - 1.0 - w) - (1.0 + w) ** 2 * np.cos(s0) ** 2


def find_s0(w: float, q_max: float = 20.0, step: float = 0.01) -> float:
    """Locate the resonant frequency at the sonic speed.

    Scans ``q -> N(iq, c0)`` on ``(sqrt(2) + 1e-6, q_max)`` for a sign
    change and refines it with Brent's method.

    Raises
    ------
    NoBracket
        If the scan finds no sign change.
    NoConvergence
        If the refined root misses the residual, identity or simplicity checks.
    """
    if w <= 1.0:
        raise ConfigError(f"mass ratio w must be > 1, got {w}")
    c0_sq = sonic_speed_sq(w)
    q = np.arange(np.sqrt(2.0) + 1e-6, q_max, step)
    p = _imag_axis(q, c0_sq, w)
    idx = np.flatnonzero(np.sign(p[:-1]) * np.sign(p[1:]) <= 0)
    if idx.size == 0:
        raise NoBracket(f"no sign change of N(iq, c0) on (sqrt 2, {q_max}) for w={w}")
    i = idx[0]
    if p[i] == 0.0:
        s0 = float(q[i])
    else:
        s0 = brentq(_imag_axis, q[i], q[i + 1], args=(c0_sq, w), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    res = abs(char_function(1j * s0, c0_sq, w))
    if res > RESIDUAL_TOL * max(1.0, s0**4):
        raise NoConvergence(f"s0 residual {res:.3e} above tolerance")
    if abs(resonance_identity(s0, w)) > IDENTITY_TOL * max(1.0, s0**4):
        raise NoConvergence("s0 fails the resonance identity")
    if abs(char_derivative(1j * s0, c0_sq, w)) <= SIMPLICITY_TOL:
        raise NoConvergence("s0 is not a simple root")
    return float(s0)


def _sinhc_sq_minus_one(lam):
    # (sinh(lam)/lam)^2 - 1, with a series near 0 to avoid cancellation
    if abs(lam) < 0.1:
        z = lam * lam
        r = z / 6.0 + z**2 / 120.0 + z**3 / 5040.0 + z**4 / 362880.0 + z**5 / 39916800.0
        return 2.0 * r + r * r
    return (np.sinh(lam) / lam) ** 2 - 1.0


def _sinhc_sq_prime(lam):
    # d/dlam (sinh(lam)/lam)^2
    if abs(lam) < 0.1:
        z = lam * lam
        # (sinh x / x)^2 = 1 + x^2/3 + 2x^4/45 + x^6/315 + 2x^8/14175 + ...
        return lam * (2.0 / 3.0 + 8.0 * z / 45.0 + 6.0 * z**2 / 315.0 + 16.0 * z**3 / 14175.0)
    s = np.sinh(lam) / lam
    return 2.0 * s * (lam * np.cosh(lam) - np.sinh(lam)) / lam**2


def _lambda0(w, eps, c_sq, maxiter=50):
    # N / lam^2 = c^4 lam^2 + 2(1+w) eps^2 - 4w [(sinh lam / lam)^2 - 1]
    c4 = c_sq * c_sq
    lam = np.sqrt(2.0 * normal_form_c31(w)) * eps
    for _ in range(maxiter):
        g = c4 * lam**2 + 2.0 * (1.0 + w) * eps**2 - 4.0 * w * _sinhc_sq_minus_one(lam)
        dg = 2.0 * c4 * lam - 4.0 * w * _sinhc_sq_prime(lam)
        step = g / dg
        lam -= step
        if abs(step) <= 1e-13 * abs(lam):
            # one polishing step; rounding floors the achievable step size
            g = c4 * lam**2 + 2.0 * (1.0 + w) * eps**2 - 4.0 * w * _sinhc_sq_minus_one(lam)
            dg = 2.0 * c4 * lam - 4.0 * w * _sinhc_sq_prime(lam)
            return float(lam - g / dg)
    raise NoConvergence(f"Newton for lambda0 did not converge (eps={eps})")


def s1_coefficient(w: float, s0: float) -> float:
    """Coefficient of eps^2 in the expansion s1 = s0 + coef * eps^2."""
    c0_sq = sonic_speed_sq(w)
    dn = char_derivative(1j * s0, c0_sq, w)
    return float((2.0 * s0**2 * ((1.0 + w) ** 2 - 2.0 * w * s0**2) / (1j * (1.0 + w) * dn)).real)


def _s1(w, eps, c_sq, s0, maxiter=50):
    q = s0 + s1_coefficient(w, s0) * eps**2
    for _ in range(maxiter):
        step = _imag_axis(q, c_sq, w) / _imag_axis_dq(q, c_sq, w)
        q -= step
        if abs(step) <= 1e-13 * abs(q):
            return float(q - _imag_axis(q, c_sq, w) / _imag_axis_dq(q, c_sq, w))
    raise NoConvergence(f"Newton for s1 did not converge (eps={eps})")


def normal_form_c31(w: float) -> float:
    return 3.0 * (1.0 + w) ** 3 / (4.0 * w * (1.0 - w + w * w))


def perturbed_eigenvalues(w: float, eps: float, s0: float | None = None) -> tuple[float, float]:
    """Real eigenvalue near 0 and imaginary-axis frequency near ``s0``.

    Parameters
    ----------
    w : float
        Mass ratio.
    eps : float
        Speed perturbation, ``0 < eps <= 0.2``.
    s0 : float, optional
        Precomputed resonance; found with :func:`find_s0` if omitted.

    Returns
    -------
    lambda0, s1 : float
        ``N(lambda0, c) = 0`` with ``lambda0 > 0`` and ``N(i s1, c) = 0``.
    """
    if not 0.0 < eps <= 0.2:
        raise ConfigError(f"eps must lie in (0, 0.2], got {eps}")
    if s0 is None:
        s0 = find_s0(w)
    c_sq = sonic_speed_sq(w) + eps**2
    return _lambda0(w, eps, c_sq), _s1(w, eps, c_sq, s0)


def spectral_data(params: DimerParams) -> SpectralData:
    s0 = find_s0(params.w)
    lam0, s1 = perturbed_eigenvalues(params.w, params.eps, s0)
    w = params.w
    return SpectralData(
        s0=s0,
        lambda0=lam0,
        s1_eps=s1,
        w=w,
        c_sq=params.c_sq,
        Ntilde_at=lambda lam, c_sq: char_function(lam, c_sq, w),
    )


def spectral_bound(lam1: float, c_sq: float, w: float) -> float:
    """Upper bound on (Im lam)^2 for a root with real part ``lam1``."""
    inner = (
        19.0 * c_sq**2 * lam1**4
        + 2.0 * c_sq * (1.0 + w) * lam1**2
        + 4.0 * w * np.cosh(lam1) ** 2
        + 2.0 * (1.0 + w) ** 2
    )
    return float(np.sqrt(2.0) / c_sq * (np.sqrt(2.0) * (1.0 + w) + np.sqrt(inner)))


def spectral_bound_check(lam: complex, c_sq: float, w: float) -> bool:
    """True if the imaginary part of ``lam`` obeys the off-axis root bound."""
    lam = complex(lam)
    return lam.imag**2 <= spectral_bound(abs(lam.real), c_sq, w)


def locate_roots(c_sq: float, w: float, re_max: float = 5.0, im_max: float = 12.0, spacing: float = 0.25,
                 tol: float = 1e-12) -> np.ndarray:
    """Newton search for roots of N(., c) in the box |Re| <= re_max, |Im| <= im_max.

    Seeds sit on a uniform grid covering the box; duplicate limits are
    merged.  The double root at 0 is excluded.
    """
    xs = np.arange(-re_max, re_max + spacing / 2, spacing)
    ys = np.arange(-im_max, im_max + spacing / 2, spacing)
    seeds = (xs[:, None] + 1j * ys[None, :]).ravel()
    found: list[complex] = []
    for z in seeds:
        for _ in range(60):
            d = char_derivative(z, c_sq, w)
            if d == 0:
                break
            step = char_function(z, c_sq, w) / d
            z = z - step
            if abs(z.real) > 2 * re_max + 1 or abs(z.imag) > 2 * im_max + 1:
                break
            if abs(step) < tol * max(1.0, abs(z)):
                break
        else:
            continue
        if abs(z.real) > re_max or abs(z.imag) > im_max or abs(z) < 1e-6:
            continue
        if abs(char_function(z, c_sq, w)) > 1e-8 * max(1.0, abs(z) ** 4):
            continue
        if all(abs(z - r) > 1e-7 for r in found):
            found.append(complex(z))
    return np.array(sorted(found, key=lambda r: (r.real, r.imag)))
