import numpy as np
import pytest

from nanokit.dispersion import DimerParams, find_s0
from nanokit.errors import ArcsinDomain, ConfigError, JumpTooLarge, NoContraction, TailTooFat
from nanokit.reduced import reverser, ripple_remainder
from nanokit.solver import (
    Cutoff,
    SolveContext,
    SolverOptions,
    apply_A,
    assemble,
    construct,
    nonlinearity_N,
    solve_theta,
    solve_Z,
    weighted_norm,
)

W = 2.0


def test_cutoff_shape():
    z = Cutoff()
    tau = np.linspace(-3, 3, 601)
    vals = z(tau)
    assert np.all(vals[np.abs(tau) <= 1] == 0)
    assert np.all(vals[np.abs(tau) >= 2] == 1)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.array_equal(vals, z(-tau))
    h = 1e-6
    fd = (z(tau + h) - z(tau - h)) / (2 * h)
    assert np.max(np.abs(fd - z.derivative(tau))) < 1e-8
    # C2 at the seams: second derivative vanishes from both sides
    for seam in (1.0, 2.0):
        d2 = (z.derivative(seam + 1e-7) - z.derivative(seam - 1e-7)) / 2e-7
        assert abs(d2) < 1e-5


def test_context_grid_defaults():
    ctx = SolveContext(DimerParams(W, 0.1, 1.0))
    kappa = np.sqrt(2 * 3.375) * 0.1
    assert ctx.T == pytest.approx(25 / kappa)
    assert ctx.h <= min(2 * np.pi / (24 * ctx.k.s0), 0.02 / kappa) + 1e-12
    assert (ctx.tau.size - 1) % 2 == 0
    assert ctx.nu == pytest.approx(0.75 * kappa)
    assert ctx.radius == pytest.approx(0.1 ** (11 / 3))


def test_eps_cap():
    with pytest.raises(ConfigError):
        SolveContext(DimerParams(W, 0.2, 1.0))


def test_nonlinearity_vanishes_in_core_for_dominant():
    ctx = SolveContext(DimerParams(W, 0.1, 1.0))
    tau = np.linspace(0, 1, 21)
    N = nonlinearity_N(tau, np.zeros((5, tau.size)), ctx, 0.0)
    assert np.max(np.abs(N)) < 1e-20


def test_nonlinearity_far_field_cross_terms(k_rich):
    ctx = SolveContext(DimerParams(W, 0.1, 1.0), k_rich, ripple_remainder(1.0))
    tau = np.linspace(2.5, 30, 50)
    H = ctx.H(tau)
    Xp = ctx.ripple(0.3, tau)
    G = ctx.system.field
    F = ctx.system.dominant
    expected = G(H + Xp) - F(H) - G(Xp)
    N = nonlinearity_N(tau, np.zeros((5, tau.size)), ctx, 0.3)
    assert np.max(np.abs(N - expected)) < 1e-15


def test_n4_bound(built_rich):
    for eps, con in built_rich.items():
        ctx = con.ctx
        tau = ctx.tau
        N4 = nonlinearity_N(tau, np.zeros((5, tau.size)), ctx, con.theta)[3]
        kappa = ctx.H.decay_rate
        env = (eps**8 + eps**2 * ctx.I) * np.exp(-kappa * tau) + ctx.I * ctx.dzeta
        assert np.max(np.abs(N4) / env) < 20.0


@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_first_iterate_scales_like_eps4(k_rich, eps):
    ctx = SolveContext(DimerParams(W, eps, 1.0), k_rich, ripple_remainder(1.0))
    assert apply_A(ctx.zero(), ctx).weighted_norm / eps**4 < 5.0


def test_fixed_point_reached(built_rich):
    for eps, con in built_rich.items():
        ctx, Z = con.ctx, con.Z
        again = apply_A(Z, ctx, con.theta)
        assert weighted_norm(again.values - Z.values, ctx.tau, ctx.nu) < 1e-12 * eps**4


def test_contraction_in_ball(built_rich, rng):
    con = built_rich[0.1]
    ctx = con.ctx
    tau = ctx.tau

    def random_member():
        a = rng.normal(size=(5, 3))
        vals = np.exp(-ctx.nu * tau) * (a[:, :1] + a[:, 1:2] * np.cos(tau) + a[:, 2:] * np.sin(0.3 * tau))
        vals = vals.astype(complex)
        vals[4] = np.conj(vals[3])
        Z = ctx.zero()
        Z.values = con.Z.values + 0.5 * ctx.radius * vals / weighted_norm(vals, tau, ctx.nu)
        return Z

    for _ in range(3):
        Za, Zb = random_member(), random_member()
        Aa = apply_A(Za, ctx, con.theta, check_tail=False)
        Ab = apply_A(Zb, ctx, con.theta, check_tail=False)
        q = weighted_norm(Aa.values - Ab.values, tau, ctx.nu) / weighted_norm(Za.values - Zb.values, tau, ctx.nu)
        assert q < 1.0


def test_zero_ripple_gives_zero_correction():
    con = construct(DimerParams(W, 0.1, 0.0))
    assert np.all(con.Z.values == 0)
    assert con.theta == 0.0


def test_eps4_scaling(built, built_rich):
    for runs in (built, built_rich):
        ratio = runs[0.05].Z.weighted_norm / runs[0.1].Z.weighted_norm
        assert 1 / 32 <= ratio <= 1 / 8


def test_picard_differences_decrease(built_rich):
    for con in built_rich.values():
        d = con.Z.diffs
        assert all(b < a for a, b in zip(d[2:], d[3:]))


def test_no_contraction_when_capped(k_rich):
    ctx = SolveContext(DimerParams(W, 0.1, 1.0), k_rich, ripple_remainder(1.0), SolverOptions(max_iter=2))
    with pytest.raises(NoContraction):
        solve_Z(ctx)


def test_tail_too_fat_for_strong_remainder(k_rich):
    # T = 25/kappa leaves an e^{-(kappa - nu) T} tail that a strong coupling amplifies
    ctx = SolveContext(DimerParams(W, 0.1, 1.0), k_rich, ripple_remainder(5.0))
    with pytest.raises(TailTooFat):
        solve_Z(ctx)


@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_theta(built_rich, eps):
    con = built_rich[eps]
    assert abs(con.theta) / eps <= 10
    assert abs(con.theta) > 0
    assert abs(con.phase.phase_residual) <= 1e-10 * con.ctx.I


def test_theta_zero_when_n4_masked():
    opts = SolverOptions(component_mask=(1, 1, 1, 0, 0))
    ctx = SolveContext(DimerParams(W, 0.1, 1.0), options=opts)
    assert solve_theta(ctx).theta == 0.0


def forcing(kappa):
    # reversible source for the oscillator that does not scale with I
    def rem(X, eps):
        out = np.zeros_like(np.asarray(X, dtype=complex))
        out[3] = out[4] = kappa * X[0] ** 2
        return out
    return rem


def test_arcsin_domain(k_rich):
    ctx = SolveContext(DimerParams(W, 0.1, 1e-6), k_rich, forcing(1.0))
    with pytest.raises(ArcsinDomain):
        solve_theta(ctx)


def test_matching_structure(built_rich):
    con = built_rich[0.1]
    jump = con.wave.jump
    assert jump[0] == 0 and jump[2] == 0
    assert np.max(np.abs(jump)) < 1e-9
    assert abs(con.Z.values[1, 0]) < 1e-15


def test_wrong_phase_is_rejected(built_rich):
    con = built_rich[0.1]
    wrong = con.theta + 0.5
    with pytest.raises(JumpTooLarge):
        assemble(con.ctx, solve_Z(con.ctx, wrong), wrong)


def test_assembled_symmetry(built_rich):
    wave = built_rich[0.1].wave
    tau = np.linspace(0.1, 80, 300)
    assert np.max(np.abs(reverser(wave(-tau)) - wave(tau))) < 1e-18


def test_far_field_bound(built_rich):
    for con in built_rich.values():
        assert con.wave.far_field_constant() < 1.0


def test_lattice_core_and_ripple_coefficients(built):
    con = built[0.1]
    p = con.profile
    s0 = find_s0(W)
    eps = 0.1
    height = np.sqrt(3 * (W * W - W + 1)) / np.sqrt(2 * W * (1 + W)) * eps
    assert con.wave.u1(np.array([1e4]))[0] == pytest.approx(height, rel=1e-12)
    I = con.ctx.I
    a1, a2 = p.ripple_amplitudes
    assert a1 == pytest.approx(2 * I * abs(np.cos(s0)))
    assert a2 == pytest.approx(2 * abs(1 + W - s0**2 * W) / (1 + W) * I)


def test_relative_displacement_core(built):
    con = built[0.1]
    p, eps = con.profile, 0.1
    k = con.ctx.k
    j = np.arange(-40, 41)
    r = p.x2(j + 1.0) - p.x1(j.astype(float))
    peak = np.max(np.abs(r))
    # sech^2 core of height (2 c31 / c32) eps^2 sqrt(c31/2) eps ... times the lattice spacing
    predicted = 2 * k.c31 / k.c32 * eps**2
    assert peak == pytest.approx(predicted, rel=0.1)


def test_positions_scaling(built):
    p = built[0.1].profile
    j = np.array([3, 4])
    y = p.positions(j, 2.0, ks=2.0, bs=4.0, m1=0.5, ls=1.5, y0=0.25)
    arg = j - p.c * 2.0 * 2.0
    expected = 0.5 * np.array([p.x1(arg[:1])[0], p.x2(arg[1:])[0]]) + j * 1.5 + 0.25
    assert np.allclose(y, expected, rtol=1e-14)
