import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from nanokit.dispersion import char_function
from nanokit.errors import ConfigError, Instability
from nanokit.lattice import (
    ChainState,
    FunctionProfile,
    advance_delay_residual,
    chain_rhs,
    core_profile,
    dispersion_frequencies,
    first_integral,
    hamiltonian,
    integrate,
    measure_speed,
    profile_state,
)

W = 2.0


def test_equilibrium_and_translation():
    assert np.all(chain_rhs(ChainState(np.zeros(10), np.zeros(10))) == 0)
    assert np.all(chain_rhs(ChainState(np.full(10, 3.7), np.zeros(10))) == 0)
    assert np.all(chain_rhs(ChainState(np.full(10, -1.2), np.zeros(10), boundary="periodic")) == 0)


def test_three_particle_hand_case():
    a = 0.3
    acc = chain_rhs(ChainState(np.array([0.0, a, 0.0]), np.zeros(3), w=W))
    # middle site j=1 is odd: -r0 - r0^2 + r1 + r1^2 with r0 = a, r1 = -a
    assert acc[1] == pytest.approx(-2 * a, abs=1e-15)
    assert acc[0] == pytest.approx(W * (a + a * a), abs=1e-15)
    assert acc[2] == pytest.approx(W * (a - a * a), abs=1e-15)


def test_state_validation():
    with pytest.raises(ConfigError):
        ChainState(np.zeros(4), np.zeros(5))
    with pytest.raises(ConfigError):
        ChainState(np.zeros(2), np.zeros(2))
    with pytest.raises(ConfigError):
        ChainState(np.zeros(5), np.zeros(5), boundary="periodic")
    with pytest.raises(ConfigError):
        ChainState(np.array([0.0, np.nan, 0.0]), np.zeros(3))
    with pytest.raises(ConfigError):
        integrate(ChainState(np.zeros(4), np.zeros(4)), 0.02, 10)


def test_sponge_profile():
    s = ChainState(np.zeros(200), np.zeros(200), boundary="damped-sponge")
    g = s.damping()
    assert g[0] == pytest.approx(0.5) and g[-1] == pytest.approx(0.5)
    assert np.all(g[40:160] == 0)
    assert np.all(np.diff(g[:40]) < 0)


def test_zero_data_stays_zero():
    tr = integrate(ChainState(np.zeros(32), np.zeros(32)), 0.01, 100, sample_every=10)
    assert np.all(tr.y == 0) and np.all(tr.v == 0)
    assert tr.times.size == 11


@pytest.mark.parametrize("m", [3, 10, 21])
def test_linear_mode_follows_dispersion(m):
    n = 64
    q = 2 * np.pi * m / n
    om = dispersion_frequencies(q, W)[0]
    # the lattice branch is the imaginary-axis root set of the characteristic function
    assert abs(char_function(1j * q, (om / q) ** 2, W)) < 1e-12
    A = 1e-3
    B = A * (2 - om**2) / (2 * np.cos(q))
    j = np.arange(n)
    amp = np.where(j % 2 == 1, A, B)
    state = ChainState(amp * np.cos(q * j), amp * om * np.sin(q * j), boundary="periodic", w=W)
    steps = 1000
    tr = integrate(state, 0.01, steps, sample_every=100, nonlinear=False)
    drift = max(
        np.max(np.abs(y - amp * np.cos(q * j - om * t))) for t, y in zip(tr.times, tr.y)
    )
    assert drift / max(A, abs(B)) < 1e-6


def test_dispersion_branches_ordered():
    q = np.linspace(0, np.pi, 50)
    ac, op = dispersion_frequencies(q, W)
    assert np.all(ac <= op)
    assert ac[0] == 0
    assert op[0] ** 2 == pytest.approx(2 * (1 + W))


def test_energy_drift(built):
    p = built[0.1].profile
    state = profile_state(p, n=400, launch=200, w=W, boundary="free")
    E0 = hamiltonian(state)
    tr = integrate(state, 0.005, 2000)
    E1 = hamiltonian(tr.final)
    assert abs(E1 - E0) / abs(E0) / 10.0 < 1e-8


def test_blowup_detected():
    y = np.where(np.arange(40) % 2 == 0, 3.0, -3.0)
    with pytest.raises(Instability):
        integrate(ChainState(y, np.zeros(40), w=W), 0.01, 5000, sample_every=10)


def test_csv_snapshot(tmp_path):
    tr = integrate(ChainState(np.linspace(0, 1, 5), np.zeros(5)), 0.01, 4, sample_every=2)
    path = tmp_path / "traj.csv"
    tr.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "j", "y", "v"]
    assert len(rows) == 1 + 3 * 5


def constant(k):
    return FunctionProfile(lambda t: np.full_like(t, k), lambda t: np.full_like(t, k), 1.2)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2))
def test_constant_profile_is_exact(k):
    tau = np.linspace(-5, 5, 11)
    assert advance_delay_residual(constant(k), tau, W)["linf"] < 1e-12
    assert abs(first_integral(constant(k), 0.3, W)) < 1e-12


def test_core_only_residual_order():
    tau_res = []
    for eps in (0.1, 0.05):
        tau = np.linspace(-10 / eps, 10 / eps, 2001)
        tau_res.append(advance_delay_residual(core_profile(W, eps), tau, W)["linf"])
    slope = np.log(tau_res[0] / tau_res[1]) / np.log(2)
    assert slope >= 2.9


def test_assembled_beats_core_only(built):
    for eps, con in built.items():
        tau = np.linspace(-10 / eps, 10 / eps, 2001)
        full = advance_delay_residual(con.profile, tau, W)
        core = advance_delay_residual(core_profile(W, eps), tau, W)
        assert full["linf"] < core["linf"]
        assert full["l2_1"] < core["l2_1"]


def test_first_integral_detects_corruption(built):
    p = built[0.1].profile
    bad = FunctionProfile(p.x1, lambda t: 1.1 * p.x2(t), p.c)
    good_drift = abs(first_integral(p, 100.0, W) - first_integral(p, 0.0, W))
    bad_drift = abs(first_integral(bad, 100.0, W) - first_integral(bad, 0.0, W))
    assert bad_drift > 1e-4
    assert bad_drift > 30 * good_drift


@pytest.fixture(scope="module")
def simulation(built):
    p = built[0.1].profile
    state = profile_state(p)
    return p, state, integrate(state, 0.01, 10000, sample_every=10)


def test_simulated_speed(simulation):
    p, _, tr = simulation
    assert measure_speed(tr) / p.c == pytest.approx(1.0, abs=0.01)


def test_simulated_ripple_wavelength(simulation, built):
    p, _, tr = simulation
    orbit = built[0.1].ctx.orbit
    site = 1200
    series = tr.y[:, site]

    def model(t, a, b, om, d):
        return a * np.cos(om * t) + b * np.sin(om * t) + d

    guess = orbit.omega * p.c
    fit, _ = curve_fit(model, tr.times, series, p0=[1e-4, 1e-4, guess, series.mean()])
    wavelength = 2 * np.pi * p.c / fit[2]
    assert wavelength == pytest.approx(2 * np.pi / (orbit.s0 + orbit.rtilde), rel=0.02)
