import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanokit.reduced import (
    FundamentalSet,
    HomoclinicH,
    ReducedState,
    ReducedSystem,
    constants,
    dominant_field,
    dominant_jacobian,
    reverser,
    ripple_remainder,
)

EPS = 0.1


def fd4(f, tau, h):
    return (-f(tau + 2 * h) + 8 * f(tau + h) - 8 * f(tau - h) + f(tau - 2 * h)) / (12 * h)


def test_constants_at_w2(k_dom, s0):
    assert (k_dom.c31, k_dom.c32) == (3.375, 6.0)
    assert k_dom.s0 == s0
    assert k_dom.is_dominant
    assert not k_dom.with_higher(e31=0.1).is_dominant


def test_reverser_is_involution(rng):
    X = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    assert np.array_equal(reverser(reverser(X)), X)


def test_state_roundtrip():
    st_ = ReducedState(1.0, 2.0, 3.0, 0.5 + 0.25j, u1=4.0)
    back = ReducedState.from_array(st_.as_array(), u1=4.0)
    assert back == st_
    assert np.allclose(st_.reversed().as_array(), reverser(st_.as_array()))
    assert st_.reversed().u1 == -4.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.floats(0.01, 0.15), st.booleans())
def test_field_is_reversible(vals, eps, rich):
    # G(S X) = -S G(X) for the normal form and the test remainder
    k = constants(2.0, s0=1.7607542224019328)
    if rich:
        k = k.with_higher(c33=1.0, c34=2.0, e31=0.5, e32=1.0, e33=0.3, e34=4.0)
    u5 = complex(vals[3], vals[4])
    X = np.array([vals[0], vals[1], vals[2], u5, np.conj(u5)], dtype=complex)[:, None]
    sys_ = ReducedSystem(eps, k, ripple_remainder(vals[7]) if rich else None)
    assert np.max(np.abs(sys_.field(reverser(X)) + reverser(sys_.field(X)))) < 1e-14


def test_jacobian_matches_finite_differences(k_dom, rng):
    X = (rng.normal(size=5) * 1e-2).astype(complex)[:, None]
    J = dominant_jacobian(X, EPS, k_dom)[..., 0]
    h = 1e-7
    for j in range(5):
        dX = np.zeros((5, 1), dtype=complex)
        dX[j] = h
        col = (dominant_field(X + dX, EPS, k_dom) - dominant_field(X - dX, EPS, k_dom))[:, 0] / (2 * h)
        assert np.max(np.abs(col - J[:, j])) < 1e-8


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.01])
def test_homoclinic_is_exact(k_dom, eps):
    H = HomoclinicH(eps, k_dom)
    tau = np.linspace(-40 / eps, 40 / eps, 1000)
    assert np.max(np.abs(dominant_field(H(tau), eps, k_dom) - H.derivative(tau))) < 1e-12
    fd = fd4(H, tau, 1e-3)
    assert np.max(np.abs(fd - H.derivative(tau))) < 1e-12


def test_homoclinic_shape(k_dom):
    H = HomoclinicH(EPS, k_dom)
    tau = np.linspace(0, 50, 11)
    assert np.allclose(reverser(H(-tau)), H(tau), atol=1e-18)
    # core of u1 = int H1 has the tanh height of the lattice front
    height = H.amplitude / H.rate
    assert height == pytest.approx(np.sqrt(3 * 3) / np.sqrt(2 * 2 * 3) * EPS, rel=1e-14)
    assert H.decay_rate == pytest.approx(np.sqrt(2 * 3.375) * EPS, rel=1e-15)


@pytest.fixture(scope="module")
def fund(k_dom):
    return FundamentalSet(EPS, k_dom)


def test_fundamental_solutions_solve_linearization(fund):
    tau = np.linspace(-40 / EPS, 40 / EPS, 801)
    J = fund.linear_operator(tau)
    h = 1e-2
    sol = fund.solutions(tau)
    dsol = fd4(fund.solutions, tau, h)
    for l in range(5):
        rhs = np.einsum("ijn,jn->in", J, sol[l])
        scale = np.max(np.abs(sol[l]), axis=0) + np.max(np.abs(rhs), axis=0)
        assert np.max(np.abs(dsol[l] - rhs) / scale) < 1e-6


def test_adjoints_solve_adjoint_system(fund):
    tau = np.linspace(-20 / EPS, 20 / EPS, 401)
    J = fund.linear_operator(tau)
    adj = fund.adjoints(tau)
    dadj = fd4(fund.adjoints, tau, 1e-2)
    for l in range(5):
        rhs = -np.einsum("jin,jn->in", np.conj(J), adj[l])
        scale = np.max(np.abs(adj[l]), axis=0) + np.max(np.abs(rhs), axis=0)
        assert np.max(np.abs(dadj[l] - rhs) / scale) < 1e-6


def test_pairing_double_precision(fund):
    # growing times decaying products cancel like e^{4|x|}; double precision holds for |x| <= 3
    tau = np.linspace(-3 / fund.rate, 3 / fund.rate, 201)
    P = fund.pairing(tau)
    assert np.max(np.abs(P - np.eye(5)[:, :, None])) < 1e-9


@pytest.mark.parametrize("tau", [-400.0, -123.4, 0.0, 77.7, 400.0])
def test_pairing_extended_precision(fund, tau):
    assert np.max(np.abs(fund.pairing_precise(tau) - np.eye(5))) < 1e-20


def test_symmetry_relations(fund):
    tau = np.linspace(-30 / EPS, 30 / EPS, 301)
    sol = fund.solutions(tau)
    mirror = fund.solutions(-tau)
    for l, sign in enumerate([-1, 1, 1, -1, 1]):
        scale = np.max(np.abs(sol[l]), axis=0)
        assert np.max(np.abs(reverser(mirror[l]) - sign * sol[l]) / scale) < 1e-9


def test_s1_is_scaled_homoclinic_derivative(fund, k_dom):
    tau = np.linspace(-30, 30, 61)
    H = HomoclinicH(EPS, k_dom)
    assert np.allclose(fund.solutions(tau)[0], H.derivative(tau) / EPS**3, rtol=1e-12, atol=1e-15)
