"""Reduced five-dimensional normal form near the sonic speed.

State vectors are ordered ``(u2, u3, u4, u5, u5bar)`` and stored as complex
arrays of shape ``(5, ...)``; ``u5bar`` is carried as an independent slot
that equals ``conj(u5)`` on real orbits.  The dominant field is

    u2' = u3
    u3' = u4 + c31 eps^2 u2 - c32 u2^2
    u4' = c31 eps^2 u3 - c32 u2 u3
    u5' = i s0 u5

which has the explicit homoclinic ``H1 = (2 c31 / c32) eps^2 sech^2(k tau)``,
``k = sqrt(c31 / 2) eps``.  Fundamental solutions of the linearization
about ``H`` and their adjoints are available in closed form; the mpmath path
keeps biorthogonality exact on long windows where the growing and decaying
modes differ by many orders of magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import mpmath as mp
import numpy as np

from .dispersion import find_s0

Remainder = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class NormalFormConstants:
    """Coefficients of the reduced normal form.

    ``c31``, ``c32`` and ``s0`` are fixed by the mass ratio; the higher
    coefficients default to zero, which is the dominant truncation.
    """

    w: float
    s0: float
    c31: float
    c32: float
    c33: float = 0.0
    c34: float = 0.0
    e31: float = 0.0
    e32: float = 0.0
    e33: float = 0.0
    e34: float = 0.0

    @property
    def is_dominant(self) -> bool:
        return not any((self.c33, self.c34, self.e31, self.e32, self.e33, self.e34))

    def with_higher(self, **coeffs) -> "NormalFormConstants":
        return replace(self, **coeffs)


def constants(w: float, s0: float | None = None, **higher) -> NormalFormConstants:
    """Closed-form ``c31``, ``c32`` plus the resonance ``s0``.

    Examples
    --------
    >>> k = constants(2.0)
    >>> k.c31, k.c32
    (3.375, 6.0)
    """
    if s0 is None:
        s0 = find_s0(w)
    q = 1.0 - w + w * w
    c31 = 3.0 * (1.0 + w) ** 3 / (4.0 * w * q)
    c32 = 2.0 * (1.0 + w) ** 2 / q
    return NormalFormConstants(w=w, s0=s0, c31=c31, c32=c32, **higher)


@dataclass
class ReducedState:
    """Point of the reduced system with the decoupled companion ``u1``."""

    u2: float
    u3: float
    u4: float
    u5: complex
    u1: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.u2, self.u3, self.u4, self.u5, np.conj(self.u5)], dtype=complex)

    @classmethod
    def from_array(cls, X, u1: float = 0.0) -> "ReducedState":
        X = np.asarray(X)
        return cls(float(X[0].real), float(X[1].real), float(X[2].real), complex(X[3]), u1)

    def reversed(self) -> "ReducedState":
        # u1 is a position and flips sign with the reverser
        return ReducedState(self.u2, -self.u3, self.u4, -np.conj(self.u5), -self.u1)


def _as_array(X) -> np.ndarray:
    if isinstance(X, ReducedState):
        return X.as_array()
    return np.asarray(X, dtype=complex)


def reverser(X) -> np.ndarray:
    """``S(u2, u3, u4, u5, u5bar) = (u2, -u3, u4, -u5bar, -u5)``."""
    X = _as_array(X)
    return np.stack([X[0], -X[1], X[2], -X[4], -X[3]])


def linear_field(X, eps: float, k: NormalFormConstants, higher: bool = True) -> np.ndarray:
    """Linear part of the normal form at ``X``."""
    X = _as_array(X)
    u2, u3, u4, u5, u5b = X
    ce = k.c31 * eps * eps
    rot = 1j * (k.s0 + (k.e31 * eps * eps if higher else 0.0))
    return np.stack([u3, u4 + ce * u2, ce * u3, rot * u5, -rot * u5b])


def nonlinear_field(X, eps: float, k: NormalFormConstants, higher: bool = True) -> np.ndarray:
    """Nonlinear part of the normal form, formed without subtracting the linear part."""
    X = _as_array(X)
    u2, u3, u4, u5, u5b = X
    p3 = -k.c32 * u2
    out3 = u2 * p3
    out4 = u3 * p3
    zero = np.zeros_like(u2)
    if higher and not k.is_dominant:
        inv = u3 * u3 - 2.0 * u2 * u4
        mod = u5 * u5b
        extra = k.c33 * inv + k.c34 * mod
        out3 = out3 + u2 * extra
        out4 = out4 + u3 * extra
        rot = 1j * (k.e32 * u2 + k.e33 * inv + k.e34 * mod)
        return np.stack([zero, out3, out4, rot * u5, -rot * u5b])
    return np.stack([zero, out3, out4, zero, zero])


def dominant_field(X, eps: float, k: NormalFormConstants, higher: bool = True) -> np.ndarray:
    """Normal-form vector field, vectorized over trailing axes.

    With ``higher=False`` only the dominant part is returned even when
    higher coefficients are configured.
    """
    return linear_field(X, eps, k, higher) + nonlinear_field(X, eps, k, higher)


def dominant_jacobian(X, eps: float, k: NormalFormConstants) -> np.ndarray:
    """Jacobian of the dominant part, shape ``(5, 5, ...)``."""
    X = _as_array(X)
    u2, u3 = X[0], X[1]
    e2 = eps * eps
    zero = np.zeros_like(u2)
    one = np.ones_like(u2)
    is0 = 1j * k.s0 * one
    return np.array(
        [
            [zero, one, zero, zero, zero],
            [k.c31 * e2 - 2.0 * k.c32 * u2, zero, one, zero, zero],
            [-k.c32 * u3, k.c31 * e2 - k.c32 * u2, zero, zero, zero],
            [zero, zero, zero, is0, zero],
            [zero, zero, zero, zero, -is0],
        ]
    )


@dataclass(frozen=True)
class ReducedSystem:
    """Truncated reduced system: normal form plus an optional reversible remainder.

    Parameters
    ----------
    eps : float
    k : NormalFormConstants
    remainder : callable, optional
        ``remainder(X, eps)`` returning an array shaped like ``X``.  It must
        be reversible, ``R(S X) = -S R(X)``, and vanish to second order at 0.
    """

    eps: float
    k: NormalFormConstants
    remainder: Remainder | None = field(default=None, compare=False)

    def field(self, X) -> np.ndarray:
        X = _as_array(X)
        return self.linear(X) + self.nonlinear(X)

    def linear(self, X) -> np.ndarray:
        return linear_field(X, self.eps, self.k)

    def nonlinear(self, X) -> np.ndarray:
        """Nonlinear part of the configured truncation, remainder included."""
        X = _as_array(X)
        out = nonlinear_field(X, self.eps, self.k)
        if self.remainder is not None:
            out = out + self.remainder(X, self.eps)
        return out

    def dominant(self, X) -> np.ndarray:
        return dominant_field(X, self.eps, self.k, higher=False)

    @property
    def is_dominant(self) -> bool:
        return self.k.is_dominant and self.remainder is None


def ripple_remainder(kappa: float) -> Remainder:
    """Reversible test remainder coupling the ripple back into the core.

    Adds ``kappa (u5^2 + u5bar^2)`` to ``u3'`` and ``i kappa u2 u5`` (with its
    conjugate) to the oscillator block.
    """

    def rem(X, eps):
        X = np.asarray(X, dtype=complex)
        out = np.zeros_like(X)
        out[1] = kappa * (X[3] ** 2 + X[4] ** 2)
        out[3] = 1j * kappa * X[0] * X[3]
        out[4] = -1j * kappa * X[0] * X[4]
        return out

    return rem


class HomoclinicH:
    """Explicit homoclinic orbit of the dominant system.

    ``H1 = A sech^2(k tau)``, ``H2 = H1'``, ``H3 = c31 eps^2 H1 - (c32/2) H1^2``
    with ``A = 2 c31 eps^2 / c32`` and ``k = sqrt(c31/2) eps``.
    """

    def __init__(self, eps: float, k: NormalFormConstants):
        self.eps = float(eps)
        self.k = k
        self.amplitude = 2.0 * k.c31 * eps**2 / k.c32
        self.rate = np.sqrt(k.c31 / 2.0) * eps

    @property
    def decay_rate(self) -> float:
        """Decay rate of ``H1``, ``sqrt(2 c31) eps``."""
        return 2.0 * self.rate

    def H1(self, tau):
        return self.amplitude / np.cosh(self.rate * np.asarray(tau, dtype=float)) ** 2

    def H2(self, tau):
        x = self.rate * np.asarray(tau, dtype=float)
        return -2.0 * self.rate * self.amplitude * np.tanh(x) / np.cosh(x) ** 2

    def H3(self, tau):
        h1 = self.H1(tau)
        return self.k.c31 * self.eps**2 * h1 - 0.5 * self.k.c32 * h1**2

    def __call__(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        z = np.zeros_like(tau)
        return np.stack([self.H1(tau), self.H2(tau), self.H3(tau), z, z]).astype(complex)

    def derivative(self, tau) -> np.ndarray:
        """Analytic ``dH/dtau``."""
        tau = np.asarray(tau, dtype=float)
        x = self.rate * tau
        s2 = 1.0 / np.cosh(x) ** 2
        t = np.tanh(x)
        h2 = self.H2(tau)
        dh2 = 2.0 * self.rate**2 * self.amplitude * s2 * (2.0 * t * t - s2)
        q = self.k.c31 * self.eps**2 - self.k.c32 * self.H1(tau)
        z = np.zeros_like(tau)
        return np.stack([h2, dh2, q * h2, z, z]).astype(complex)


class _NumpyMath:
    exp = staticmethod(np.exp)
    sqrt = staticmethod(np.sqrt)
    sinh = staticmethod(np.sinh)
    cosh = staticmethod(np.cosh)
    tanh = staticmethod(np.tanh)

    @staticmethod
    def sech(x):
        return 1.0 / np.cosh(x)

    @staticmethod
    def expi(x):
        return np.exp(1j * x)

    @staticmethod
    def num(x):
        return x


class _MpMath:
    exp = staticmethod(mp.exp)
    sqrt = staticmethod(mp.sqrt)
    sinh = staticmethod(mp.sinh)
    cosh = staticmethod(mp.cosh)
    tanh = staticmethod(mp.tanh)
    sech = staticmethod(mp.sech)
    expi = staticmethod(mp.expj)

    @staticmethod
    def num(x):
        return mp.mpf(x)


class FundamentalSet:
    """Fundamental solutions of ``Z' = L(tau) Z`` about the homoclinic and their adjoints.

    ``s1 = H'/eps^3`` decays, ``s2`` grows, ``s3`` stays bounded and
    ``s4``, ``s5`` rotate in the oscillator block.  The adjoints satisfy
    ``<s_l, s_k*> = delta_lk`` with the sesquilinear pairing
    ``<a, b> = sum a_i conj(b_i)``.

    Evaluation uses numpy by default.  :meth:`solutions_precise` and
    :meth:`pairing_precise` switch to mpmath for long windows.
    """

    def __init__(self, eps: float, k: NormalFormConstants):
        self.eps = float(eps)
        self.k = k
        self.rate = np.sqrt(k.c31 / 2.0) * eps

    def _blocks(self, tau, m):
        """Return (solutions, adjoints) as nested 5x5 lists of components."""
        k = self.k
        eps = m.num(self.eps)
        c31, c32, s0 = m.num(k.c31), m.num(k.c32), m.num(k.s0)
        # derived constants are formed in the working precision; the
        # biorthogonality cancellations are exact only for consistent values
        rate = m.sqrt(c31 / 2) * eps
        x = rate * tau
        s = m.sech(x)
        t = m.tanh(x)
        s2 = s * s
        e2 = eps * eps
        A = 2 * c31 * e2 / c32
        H1 = A * s2
        H2 = -2 * rate * A * s2 * t
        dH2 = 2 * rate**2 * A * s2 * (2 * t * t - s2)
        q = c31 * e2 - c32 * H1

        B = c32 / (16 * c31**2 * e2 * e2)
        ut1 = B * (6 + m.cosh(2 * x) - 15 * s2 * (1 - x * t))
        dut1 = rate * B * (2 * m.sinh(2 * x) + 30 * s2 * t * (1 - x * t) + 15 * s2 * (t + x * s2))
        ut2 = (3 * s2 * (1 - x * t) - 1) / (2 * c31 * e2)
        dut2 = -rate * 3 * s2 * (3 * t - 2 * x * t * t + x * s2) / (2 * c31 * e2)
        s11 = 2 * c31 * s2 / (c32 * eps)
        s21 = c32 * m.sqrt(m.num(2.0)) / (32 * c31**2 * m.sqrt(c31) * eps) * (
            12 * x - 15 * x * s2 + m.sinh(2 * x) - 15 * t
        )

        eps3 = eps**3
        eps4 = e2 * e2
        z = 0 * x
        ep = m.expi(s0 * tau)
        em = m.expi(-s0 * tau)
        sols = [
            [H2 / eps3, dH2 / eps3, q * H2 / eps3, z, z],
            [eps4 * ut1, eps4 * dut1, eps4 * q * ut1, z, z],
            [e2 * ut2, e2 * dut2, e2 * q * ut2 + e2, z, z],
            [z, z, z, ep, em],
            [z, z, z, -1j * ep, 1j * em],
        ]
        adj = [
            [-(eps4 * dut1 - q * s21) / eps, eps4 * ut1 / eps, -s21 / eps, z, z],
            [(dH2 / eps3 - q * s11) / eps, -(H2 / eps3) / eps, s11 / eps, z, z],
            [-q / e2, z, 1 / e2, z, z],
            [z, z, z, ep / 2, em / 2],
            [z, z, z, -1j * ep / 2, 1j * em / 2],
        ]
        return sols, adj

    def solutions(self, tau) -> np.ndarray:
        """Array ``[l, i, n]``: component ``i`` of ``s_{l+1}`` at ``tau[n]``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        sols, _ = self._blocks(tau, _NumpyMath)
        return np.array([[np.broadcast_to(c, tau.shape) for c in row] for row in sols], dtype=complex)

    def adjoints(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        _, adj = self._blocks(tau, _NumpyMath)
        return np.array([[np.broadcast_to(c, tau.shape) for c in row] for row in adj], dtype=complex)

    def auxiliaries(self, tau) -> dict:
        """``u1t``, ``u2t``, ``s11``, ``s21`` evaluated with numpy."""
        tau = np.asarray(tau, dtype=float)
        sol = self.solutions(tau)
        adj = self.adjoints(tau)
        e = self.eps
        return {
            "u1t": sol[1, 0].real / e**4,
            "u2t": sol[2, 0].real / e**2,
            "s11": (adj[1, 2] * e).real,
            "s21": -(adj[0, 2] * e).real,
        }

    def linear_operator(self, tau) -> np.ndarray:
        """Matrix of the linearization about ``H``, shape ``(5, 5, n)``."""
        H = HomoclinicH(self.eps, self.k)
        return dominant_jacobian(H(np.atleast_1d(tau)), self.eps, self.k)

    def pairing(self, tau) -> np.ndarray:
        """``P[l, k, n] = <s_l, s_k*>`` at each ``tau[n]``."""
        sol = self.solutions(tau)
        adj = self.adjoints(tau)
        return np.einsum("lin,kin->lkn", sol, np.conj(adj))

    def _dps(self, tau) -> int:
        # growing times decaying products span about e^{4|x|}
        return 30 + int(4.0 * abs(self.rate * float(tau)) / np.log(10.0))

    def solutions_precise(self, tau: float, dps: int | None = None):
        """Solutions and adjoints at one ``tau`` as mpmath matrices."""
        with mp.workdps(dps or self._dps(tau)):
            sols, adj = self._blocks(mp.mpf(tau), _MpMath)
            return mp.matrix(sols), mp.matrix(adj)

    def pairing_precise(self, tau: float, dps: int | None = None) -> np.ndarray:
        """``<s_l, s_k*>`` at one ``tau`` in extended precision, rounded to complex."""
        with mp.workdps(dps or self._dps(tau)):
            sols, adj = self._blocks(mp.mpf(tau), _MpMath)
            out = np.empty((5, 5), dtype=complex)
            for l in range(5):
                for j in range(5):
                    acc = mp.mpc(0)
                    for i in range(5):
                        acc += mp.mpc(sols[l][i]) * mp.conj(mp.mpc(adj[j][i]))
                    out[l, j] = complex(acc)
            return out


def fundamental_solutions(eps: float, k: NormalFormConstants) -> FundamentalSet:
    return FundamentalSet(eps, k)


def homoclinic(eps: float, k: NormalFormConstants) -> HomoclinicH:
    return HomoclinicH(eps, k)
