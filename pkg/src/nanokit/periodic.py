"""Small reversible periodic orbits of the truncated reduced system.

The orbit is sought as a truncated Fourier series in the phase
``phi = Omega tau``.  Reversibility fixes the parity of every component:

    u2 = sum_k a_k cos(k phi)          (k >= 1, mean pinned to 0)
    u3 = sum_k b_k sin(k phi)
    u4 = sum_k c_k cos(k phi)          (k >= 0)
    u5 = i sum_k d_k exp(i k phi)      (real d_k, d_1 = I pinned)

The mean of u2 is pinned because the system has a line of equilibria
``(u2, 0, -c31 eps^2 u2 + c32 u2^2, 0, 0)``; without the pin the balance
equations are singular.  The unknowns ``a, b, c, d`` and ``Omega`` form a
square system of size ``5K + 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from .errors import ConfigError, NoConvergence
from .reduced import NormalFormConstants, Remainder, ReducedSystem

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class PeriodicOrbit:
    """Fourier representation of a reversible periodic orbit.

    Attributes
    ----------
    I : float
        Amplitude of the pinned ``u5`` fundamental.
    rtilde : float
        Frequency correction, ``Omega = s0 + rtilde``.
    coeffs : ndarray, shape (5, 2K+1)
        Exponential Fourier coefficients for harmonics ``-K..K``.
    u1_coeffs : ndarray, shape (2K+1,)
        Coefficients of the companion ``u1p`` with zero mean.
    residual : float
        Max ODE residual on a fine grid over one period.
    """

    I: float
    K: int
    s0: float
    rtilde: float
    coeffs: np.ndarray = field(repr=False)
    u1_coeffs: np.ndarray = field(repr=False)
    residual: float = 0.0

    @property
    def omega(self) -> float:
        return self.s0 + self.rtilde

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @property
    def fourier(self) -> dict:
        """Harmonic index mapped to the 5-component coefficient vector."""
        return {int(k): self.coeffs[:, i] for i, k in enumerate(self.harmonics)}

    def _phase(self, tau, theta):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.exp(1j * np.outer(self.harmonics, self.omega * (tau - theta)))

    def __call__(self, tau, theta: float = 0.0) -> np.ndarray:
        """State ``(u2, u3, u4, u5, u5bar)`` at ``tau - theta``, shape ``(5, n)``."""
        return self.coeffs @ self._phase(tau, theta)

    def derivative(self, tau, theta: float = 0.0) -> np.ndarray:
        return (self.coeffs * (1j * self.omega * self.harmonics)) @ self._phase(tau, theta)

    def u1(self, tau, theta: float = 0.0) -> np.ndarray:
        return (self.u1_coeffs @ self._phase(tau, theta)).real


def _unpack(x, K):
    a = x[:K]
    b = x[K : 2 * K]
    c = x[2 * K : 3 * K + 1]
    d_free = x[3 * K + 1 : 5 * K + 1]
    omega = x[5 * K + 1]
    return a, b, c, d_free, omega


def _coefficients(a, b, c, d, K) -> np.ndarray:
    """Exponential coefficients from the parity-reduced unknowns."""
    C = np.zeros((5, 2 * K + 1), dtype=complex)
    pos = slice(K + 1, 2 * K + 1)
    neg = slice(K - 1, None, -1)
    C[0, pos] = a / 2
    C[0, neg] = a / 2
    C[1, pos] = b / 2j
    C[1, neg] = -b / 2j
    C[2, K] = c[0]
    C[2, pos] = c[1:] / 2
    C[2, neg] = c[1:] / 2
    C[3] = 1j * d
    C[4] = np.conj(C[3][::-1])
    return C


def solve_periodic(
    eps: float,
    I: float,
    K: int,
    k: NormalFormConstants,
    remainder: Remainder | None = None,
    tol: float = RESIDUAL_TOL,
) -> PeriodicOrbit:
    """Harmonic-balance solve for the reversible periodic orbit of amplitude ``I``.

    Parameters
    ----------
    eps : float
        Speed perturbation.
    I : float
        Pinned amplitude of the ``u5`` fundamental; ``I = 0`` returns the rest state.
    K : int
        Number of harmonics, at least 3.
    k : NormalFormConstants
    remainder : callable, optional
        Reversible remainder added to the normal form.
    tol : float
        Max allowed ODE residual over one period.

    Raises
    ------
    NoConvergence
        If the Newton-type solve fails or the residual exceeds ``tol``.
    """
    if K < 3:
        raise ConfigError(f"need at least 3 harmonics, got K={K}")
    if I < 0:
        raise ConfigError(f"amplitude must be >= 0, got {I}")
    system = ReducedSystem(eps, k, remainder)
    lin_shift = k.e31 * eps**2
    n = 2 * K + 1
    if I == 0.0:
        zero = np.zeros((5, n), dtype=complex)
        return PeriodicOrbit(0.0, K, k.s0, lin_shift, zero, np.zeros(n, dtype=complex), 0.0)

    M = max(64, 8 * K + 8)
    phi = 2.0 * np.pi * np.arange(M) / M
    harm = np.arange(-K, K + 1)
    E = np.exp(1j * np.outer(harm, phi))
    kk = np.arange(1, K + 1)
    cos_k = np.cos(np.outer(kk, phi))
    sin_k = np.sin(np.outer(kk, phi))
    proj = np.exp(-1j * np.outer(harm, phi)) / M

    def full_d(d_free):
        d = np.empty(n)
        d[: K + 1] = d_free[: K + 1]
        d[K + 1] = 1.0
        d[K + 2 :] = d_free[K + 1 :]
        return d

    def residual(y):
        a, b, c, d_free, omega = _unpack(y, K)
        C = _coefficients(a, b, c, full_d(d_free), K) * I
        X = C @ E
        dX = (C * (1j * omega * harm)) @ E
        R = (dX - system.field(X)) / I
        r2 = 2.0 / M * sin_k @ R[0].real
        r3 = np.concatenate([[R[1].real.mean()], 2.0 / M * cos_k @ R[1].real])
        r4 = 2.0 / M * sin_k @ R[2].real
        r5 = (proj @ R[3]).real
        return np.concatenate([r2, r3, r4, r5])

    y0 = np.zeros(5 * K + 2)
    y0[-1] = k.s0 + lin_shift + k.e34 * I**2
    sol = root(residual, y0, method="hybr", options={"xtol": 1e-14})
    a, b, c, d_free, omega = _unpack(sol.x, K)
    C = _coefficients(a, b, c, full_d(d_free), K) * I
    u1 = np.zeros(n, dtype=complex)
    nz = harm != 0
    u1[nz] = C[0, nz] / (1j * omega * harm[nz])
    orbit = PeriodicOrbit(I, K, k.s0, float(omega - k.s0), C, u1)
    res = orbit_residual(orbit, system)
    if res > tol:
        raise NoConvergence(f"harmonic balance residual {res:.3e} (K={K}, I={I}): {sol.message}")
    return PeriodicOrbit(I, K, k.s0, orbit.rtilde, C, u1, res)


def orbit_residual(orbit: PeriodicOrbit, system: ReducedSystem, n: int = 2048) -> float:
    """Max of ``|X' - G(X)|`` over one period on ``n`` points."""
    tau = np.linspace(0.0, orbit.period, n, endpoint=False)
    return float(np.max(np.abs(orbit.derivative(tau) - system.field(orbit(tau)))))


def orbit_eval(p: PeriodicOrbit, tau, theta: float = 0.0) -> np.ndarray:
    """Phase-shifted evaluation ``X_p(tau - theta)``, shape ``(5, n)``."""
    return p(tau, theta)
