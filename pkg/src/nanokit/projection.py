"""Phase space of the advance-delay system and its spectral projections.

A point of the phase space is ``(x1, u1t, w1, x2, u2t, w2)`` where ``w1``
and ``w2`` are functions of ``v`` on ``[-1, 1]`` sampled on a uniform
grid.  The linear operator is

    L_c U = (u1t, (w2(1) - 2 x1 + w2(-1)) / c^2, w1_v,
             u2t, w (w1(1) - 2 x2 + w1(-1)) / c^2, w2_v)

and the reverser flips the sign of the positions and reflects ``v``.
At the sonic speed ``L_c`` has a four-dimensional Jordan block at 0 and
a simple pair at ``+-i s0``; :class:`EigenBasis` holds the generalized
eigenvectors together with the dual functionals that extract their
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .dispersion import char_function, find_s0, sonic_speed_sq
from .errors import ConfigError, GridTooCoarse, NearSingular

DEFAULT_NV = 257
MIN_NV = 16
SINGULAR_TOL = 1e-8
DUALITY_TOL = 1e-6


def v_grid(n: int = DEFAULT_NV) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n)


@dataclass(frozen=True)
class PhasePoint:
    """Element of the phase space, possibly complex-valued.

    ``w1`` and ``w2`` are samples on ``v_grid(len(w1))``.
    """

    x1: complex
    u1t: complex
    w1: np.ndarray
    x2: complex
    u2t: complex
    w2: np.ndarray

    def __post_init__(self):
        w1 = np.asarray(self.w1)
        w2 = np.asarray(self.w2)
        if w1.shape != w2.shape or w1.ndim != 1:
            raise ConfigError("w1 and w2 must be 1-d arrays on the same grid")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def n_v(self) -> int:
        return self.w1.size

    @property
    def v(self) -> np.ndarray:
        return v_grid(self.n_v)

    def parts(self):
        return self.x1, self.u1t, self.w1, self.x2, self.u2t, self.w2

    @classmethod
    def from_functions(cls, x1, u1t, w1, x2, u2t, w2, n: int = DEFAULT_NV) -> "PhasePoint":
        """Build a point from scalars and callables (or scalars) in ``v``."""
        v = v_grid(n)

        def sample(g):
            if callable(g):
                return np.asarray(g(v)) * np.ones(n)
            return np.full(n, g)

        return cls(x1, u1t, sample(w1), x2, u2t, sample(w2))

    def _map(self, other, op):
        if isinstance(other, PhasePoint):
            return PhasePoint(*(op(a, b) for a, b in zip(self.parts(), other.parts())))
        return PhasePoint(*(op(a, other) for a in self.parts()))

    def __add__(self, other):
        return self._map(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._map(other, lambda a, b: a - b)

    def __mul__(self, scalar):
        return self._map(scalar, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def conj(self) -> "PhasePoint":
        return PhasePoint(*(np.conj(a) for a in self.parts()))

    def max_norm(self) -> float:
        return float(max(np.max(np.abs(a)) for a in self.parts()))

    def compatibility_defect(self) -> float:
        """``max(|w1(0) - x1|, |w2(0) - x2|)``; zero for members of the domain."""
        mid = self.n_v // 2
        return float(max(abs(self.w1[mid] - self.x1), abs(self.w2[mid] - self.x2)))


def _check_grid(n: int):
    if n < MIN_NV:
        raise GridTooCoarse(f"v-grid has {n} points, need at least {MIN_NV}")
    if n % 2 == 0:
        raise ConfigError("v-grid needs an odd number of points (Simpson on each half)")


def _fd_weights(offsets) -> np.ndarray:
    # first-derivative weights on integer offsets (unit spacing)
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    A = offsets[None, :] ** np.arange(k)[:, None]
    rhs = np.zeros(k)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


_EDGE0 = _fd_weights(np.arange(6))
_EDGE1 = _fd_weights(np.arange(6) - 1)


def diff_v(f: np.ndarray) -> np.ndarray:
    """Fourth-order derivative on the uniform v-grid.

    Centered five-point stencil inside; the two outermost points at each end
    use one-sided six-point stencils so the edge error stays at the level of
    the interior one.
    """
    n = f.size
    _check_grid(n)
    h = 2.0 / (n - 1)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = _EDGE0 @ f[:6] / h
    d[1] = _EDGE1 @ f[:6] / h
    d[-1] = -(_EDGE0 @ f[:-7:-1]) / h
    d[-2] = -(_EDGE1 @ f[:-7:-1]) / h
    return d


def apply_L(c_sq: float, w: float, U: PhasePoint) -> PhasePoint:
    """Apply the linear advance-delay operator at speed ``sqrt(c_sq)``.

    Raises
    ------
    GridTooCoarse
        If the v-grid has fewer than 16 points.
    """
    _check_grid(U.n_v)
    x1, u1t, w1, x2, u2t, w2 = U.parts()
    return PhasePoint(
        u1t,
        (w2[-1] - 2.0 * x1 + w2[0]) / c_sq,
        diff_v(w1),
        u2t,
        w * (w1[-1] - 2.0 * x2 + w1[0]) / c_sq,
        diff_v(w2),
    )


def apply_S(U: PhasePoint) -> PhasePoint:
    """Reverser: negate positions and reflect ``v -> -v``."""
    x1, u1t, w1, x2, u2t, w2 = U.parts()
    return PhasePoint(-x1, u1t, -w1[::-1], -x2, u2t, -w2[::-1])


def _halves(g):
    # samples of g(s) and g(-s) for s in [0, 1]
    mid = g.size // 2
    return g[mid:], g[mid::-1]


def _resolvent_positions(lam, c_sq, w, f: PhasePoint):
    """x1, x2 of the resolvent applied to ``f`` and the value of N."""
    n_val = char_function(lam, c_sq, w)
    f1, f2, f3, f4, f5, f6 = f.parts()
    s = v_grid(f.n_v)[f.n_v // 2 :]
    ep = np.exp(lam * (1.0 - s))
    em = np.exp(-lam * (1.0 - s))
    f3p, f3m = _halves(f3)
    f6p, f6m = _halves(f6)
    j6 = simpson(ep * f6p - em * f6m, x=s)
    j3 = simpson(ep * f3p - em * f3m, x=s)
    F1 = f2 + lam * f1 - j6 / c_sq
    F2 = f5 + lam * f4 - w * j3 / c_sq
    ch = np.cosh(lam)
    x1 = c_sq**2 / n_val * ((lam**2 + 2.0 * w / c_sq) * F1 + 2.0 * ch / c_sq * F2)
    x2 = c_sq**2 / n_val * (2.0 * w * ch / c_sq * F1 + (lam**2 + 2.0 / c_sq) * F2)
    return x1, x2, n_val


@lru_cache(maxsize=8)
def _cell_weights(n: int):
    # per cell [v_i, v_{i+1}]: start index and weights of a six-node interpolant
    starts = np.clip(np.arange(n - 1) - 2, 0, n - 6)
    weights = np.empty((n - 1, 6))
    k = np.arange(6)
    for i, st in enumerate(starts):
        o = np.arange(st, st + 6) - i
        A = o[None, :] ** k[:, None]
        weights[i] = np.linalg.solve(A.astype(float), 1.0 / (k + 1.0))
    return starts, weights


def cumulative_integral(g: np.ndarray, h: float) -> np.ndarray:
    """Running integral from the first sample on a uniform grid.

    Each cell integrates the degree-5 interpolant through six nearby nodes,
    so the result is smooth enough to be differentiated again.
    """
    n = g.size
    starts, weights = _cell_weights(n)
    idx = starts[:, None] + np.arange(6)[None, :]
    cells = h * np.sum(weights * g[idx], axis=1)
    return np.concatenate([[0.0], np.cumsum(cells)])


def _transport(lam, x0, g, v):
    # solves lam*W - W_v = g with W(0) = x0: W = e^{lam v}(x0 - int_0^v e^{-lam s} g)
    mid = v.size // 2
    integrand = np.exp(-lam * v) * g
    h = v[1] - v[0]
    pos = cumulative_integral(integrand[mid:], h)
    neg = -cumulative_integral(integrand[mid::-1], h)
    G = np.concatenate([neg[:0:-1], pos])
    return np.exp(lam * v) * (x0 - G)


def resolvent_solve(lam: complex, c_sq: float, w: float, f: PhasePoint) -> PhasePoint:
    """Solve ``(lam I - L_c) U = f`` in closed form.

    Raises
    ------
    NearSingular
        If ``|N(lam, c)| <= 1e-8``.
    """
    _check_grid(f.n_v)
    lam = complex(lam)
    n_val = char_function(lam, c_sq, w)
    if abs(n_val) <= SINGULAR_TOL:
        raise NearSingular(f"|N(lambda, c)| = {abs(n_val):.3e} at lambda = {lam}")
    x1, x2, _ = _resolvent_positions(lam, c_sq, w, f)
    f1, _, f3, f4, _, f6 = f.parts()
    v = f.v
    return PhasePoint(
        x1,
        lam * x1 - f1,
        _transport(lam, x1, f3, v),
        x2,
        lam * x2 - f4,
        _transport(lam, x2, f6, v),
    )


def eigenvectors(w: float, s0: float, n: int = DEFAULT_NV) -> list[PhasePoint]:
    """Jordan chain U1..U4 at 0 and the eigenvector U5 at ``i s0``."""
    v = v_grid(n)
    a = (w - 1.0) / (2.0 * (1.0 + w))
    b = (1.0 + w - s0**2 * w) / (1.0 + w)
    one = np.ones(n)
    cs = np.cos(s0)
    e = np.exp(1j * s0 * v)
    return [
        PhasePoint(1.0, 0.0, one, 1.0, 0.0, one),
        PhasePoint(0.0, 1.0, v, 0.0, 1.0, v),
        PhasePoint(0.0, 0.0, v**2 / 2, a, 0.0, a + v**2 / 2),
        PhasePoint(0.0, 0.0, v**3 / 6, 0.0, a, a * v + v**3 / 6),
        PhasePoint(cs + 0j, 1j * s0 * cs, cs * e, b + 0j, 1j * s0 * b, b * e),
    ]


def _table_coeffs(f: PhasePoint, w: float, s0: float, variant: str) -> np.ndarray:
    """Closed-form projection coefficients from moment integrals of f3, f6.

    ``variant='printed'`` uses the moment table as published, where the
    second and third moments of the f3 terms and of f6(-s) are all written
    with f6(s).  ``variant='corrected'`` uses the pattern dictated by the
    Jordan chain: f6(-s), f3(s), f3(-s) respectively.
    """
    f1, f2, f3, f4, f5, f6 = f.parts()
    s = v_grid(f.n_v)[f.n_v // 2 :]
    f3p, f3m = _halves(f3)
    f6p, f6m = _halves(f6)
    r = 1.0 - s

    def I(g):
        return simpson(g, x=s)

    d100, d11 = I(f6p), I(r * f6p)
    d12, d13 = 0.5 * I(r**2 * f6p), I(r**3 * f6p) / 6.0
    d200, d21 = I(f6m), -I(r * f6m)
    d300, d31 = I(f3p), I(r * f3p)
    d400, d41 = I(f3m), -I(r * f3m)
    if variant == "printed":
        d22, d23 = 0.5 * I(r**2 * f6p), -I(r**3 * f6p) / 6.0
        d32, d33 = 0.5 * I(r**2 * f6p), I(r**3 * f6p) / 6.0
        d42, d43 = 0.5 * I(r**2 * f6p), -I(r**3 * f6p) / 6.0
    elif variant == "corrected":
        d22, d23 = 0.5 * I(r**2 * f6m), -I(r**3 * f6m) / 6.0
        d32, d33 = 0.5 * I(r**2 * f3p), I(r**3 * f3p) / 6.0
        d42, d43 = 0.5 * I(r**2 * f3m), -I(r**3 * f3m) / 6.0
    else:
        raise ValueError(f"unknown table variant {variant!r}")

    q = 1.0 - w + w * w
    p = 1.0 + w
    a1 = -(p**3) / (5.0 * q * q) * (-2.0 * w * f1 - 2.0 * f4 + p * (d11 - d21 + d31 - d41)) - 3.0 / (4.0 * q) * (
        4.0 * w * f1
        - 2.0 * p * (d11 - d21)
        - 2.0 * p**2 * (d13 - d23)
        + p * (2.0 * f4 + p * (d41 - d31 + 2.0 * (d43 - d33)))
    )
    a2 = -(p**3) / (5.0 * q * q) * (-2.0 * w * f2 - 2.0 * f5 + p * (d100 - d200 + d300 - d400)) - 3.0 / (4.0 * q) * (
        4.0 * w * f2
        - 2.0 * p * (d100 - d200)
        - 2.0 * p**2 * (d12 - d22)
        + p * (2.0 * f5 + p * (d400 - d300) + 2.0 * p * (d42 - d32))
    )
    a3 = 3.0 * p / (2.0 * q) * (-2.0 * w * f1 - 2.0 * f4 + p * (d11 - d21 + d31 - d41))
    a4 = 3.0 * p / (2.0 * q) * (-2.0 * w * f2 - 2.0 * f5 + p * (d100 - d200 + d300 - d400))

    e = np.exp(1j * s0 * r)
    em = np.exp(-1j * s0 * r)
    dt10, dt20 = I(e * f6p), I(em * f6m)
    dt30, dt40 = I(e * f3p), I(em * f3m)
    dn = char_function(1j * s0, sonic_speed_sq(w), w, order=1)
    a5 = (
        2.0 * w / (p**2 * dn)
        * (
            (p**2 / w) / (p / w - s0**2) * np.cos(s0) * (2.0 * w * (f2 + 1j * s0 * f1) + p * (dt20 - dt10))
            + 2.0 * p * (f5 + 1j * s0 * f4)
            - p**2 * (dt30 - dt40)
        )
    )
    return np.array([a1, a2, a3, a4, a5], dtype=complex)


def laurent_coeffs(f: PhasePoint, w: float, s0: float, radius: float = 0.8, m: int = 128) -> np.ndarray:
    """Projection coefficients read off the Laurent expansion of the resolvent.

    The x1-component of ``(lam - L_c0)^{-1} f`` near 0 is
    ``sum_k a_k lam^{-k}`` plus a regular part, so ``a_k`` is the mean of
    ``lam^k x1(lam)`` over a circle around 0.  The coefficient at ``i s0``
    is the residue there divided by the matching component of U5.
    """
    c0_sq = sonic_speed_sq(w)
    th = 2.0 * np.pi * np.arange(m) / m
    lam = radius * np.exp(1j * th)
    x1 = np.array([_resolvent_positions(z, c0_sq, w, f)[0] for z in lam])
    out = [np.mean(lam**k * x1) for k in range(1, 5)]
    lam5 = 1j * s0 + 0.3 * np.exp(1j * th)
    pos = np.array([_resolvent_positions(z, c0_sq, w, f)[:2] for z in lam5])
    res = np.mean((lam5 - 1j * s0)[:, None] * pos, axis=0)
    b = (1.0 + w - s0**2 * w) / (1.0 + w)
    cs = np.cos(s0)
    out.append(res[0] / cs if abs(cs) >= abs(b) else res[1] / b)
    return np.array(out, dtype=complex)


@dataclass(frozen=True)
class EigenBasis:
    """Generalized eigenvectors at the sonic speed and their dual functionals.

    Attributes
    ----------
    source : str
        Which functional realization passed the duality check:
        ``'printed'``, ``'corrected'`` or ``'laurent'``.
    duality_defects : dict
        Max deviation of ``V_k*(U_j)`` from the identity for each realization tried.
    """

    w: float
    s0: float
    U: tuple
    source: str
    duality_defects: dict = field(compare=False)

    @property
    def n_v(self) -> int:
        return self.U[0].n_v

    def functionals(self, f: PhasePoint, source: str | None = None) -> np.ndarray:
        src = source or self.source
        if src == "laurent":
            return laurent_coeffs(f, self.w, self.s0)
        return _table_coeffs(f, self.w, self.s0, src)

    def duality_matrix(self, source: str | None = None) -> np.ndarray:
        """``M[k, j] = V_k*(U_j)``."""
        return np.array([self.functionals(u, source) for u in self.U]).T


def build_basis(w: float, n: int = DEFAULT_NV, s0: float | None = None) -> EigenBasis:
    """Assemble the basis and pick the first functional table that passes duality.

    The published table is tried first, then the corrected moment table,
    then the contour-integral realization.
    """
    _check_grid(n)
    if s0 is None:
        s0 = find_s0(w)
    U = tuple(eigenvectors(w, s0, n))
    defects = {}
    for source in ("printed", "corrected", "laurent"):
        basis = EigenBasis(w, s0, U, source, defects)
        defect = float(np.max(np.abs(basis.duality_matrix() - np.eye(5))))
        defects[source] = defect
        if defect <= DUALITY_TOL:
            return basis
    raise NearSingular(f"no functional realization satisfies duality: {defects}")


@lru_cache(maxsize=16)
def _cached_basis(w: float, n: int) -> EigenBasis:
    return build_basis(w, n)


def project_coeffs(U: PhasePoint, w: float, basis: EigenBasis | None = None) -> tuple:
    """Spectral projection coefficients ``(a1, a2, a3, a4, a5)``.

    ``a1..a4`` are returned as floats when ``U`` is real-valued.
    """
    if basis is None:
        basis = _cached_basis(float(w), U.n_v)
    a = basis.functionals(U)
    real_input = all(np.isrealobj(p) for p in U.parts())
    head = [float(x.real) if real_input else complex(x) for x in a[:4]]
    return (*head, complex(a[4]))
