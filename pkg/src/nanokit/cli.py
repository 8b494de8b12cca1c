"""Command-line entry point: ``nanokit {dispersion,construct,simulate,verify,sweep}``.

Every run writes into ``--output-dir`` (default ``$NANOKIT_OUTPUT_DIR`` or
``./nanokit-out``): CSV files for arrays and one ``summary.json``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dispersion import (
    DimerParams,
    char_function,
    find_s0,
    normal_form_c31,
    perturbed_eigenvalues,
    resonance_identity,
    sonic_speed_sq,
)
from .errors import ConfigError, GridTooCoarse, NanokitError
from .lattice import (
    BOUNDARIES,
    advance_delay_residual,
    core_profile,
    first_integral,
    integrate,
    measure_speed,
    profile_state,
)
from .projection import build_basis
from .reduced import FundamentalSet, HomoclinicH, dominant_field
from .solver import Construction, SolverOptions, construct

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

COMMANDS = ("dispersion", "construct", "simulate", "verify", "sweep")
EPS_MAX = 0.15


@dataclass
class RunConfig:
    command: str
    w: float = 2.0
    eps: float = 0.1
    I0: float = 1.0
    T: float | None = None
    h: float | None = None
    K: int = 7
    z_tol: float = 1e-12
    theta_tol: float = 1e-14
    jump_tol: float = 1e-9
    max_iter: int = 200
    output_dir: Path = Path("nanokit-out")
    eps_list: list = field(default_factory=lambda: [0.1, 0.05])
    workers: int = 1
    n_sites: int = 2048
    launch: int = 512
    t_end: float = 100.0
    dt: float = 0.01
    sample_every: int = 1000
    boundary: str = "damped-sponge"
    strict: bool = False
    simulate: bool = True

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not np.isfinite(self.w) or self.w <= 1.0:
            raise ConfigError(f"--w must be > 1, got {self.w}")
        eps_values = self.eps_list if self.command == "sweep" else [self.eps]
        for eps in eps_values:
            if not (0.0 < eps <= EPS_MAX):
                raise ConfigError(f"--eps must lie in (0, {EPS_MAX}], got {eps}")
        if not self.I0 > 0.0:
            raise ConfigError(f"--I0 must be > 0, got {self.I0}")
        if self.K < 3:
            raise ConfigError(f"--K must be at least 3, got {self.K}")
        if self.h is not None and self.h <= 0.0:
            raise ConfigError(f"--h must be > 0, got {self.h}")
        if self.T is not None and self.T <= 2.0:
            raise ConfigError(f"--T must exceed the cutoff support 2, got {self.T}")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if self.n_sites < 3 or not (0 <= self.launch < self.n_sites):
            raise ConfigError("--n-sites must be >= 3 and --launch inside the chain")
        if not (0.0 < self.dt <= 0.01):
            raise ConfigError(f"--dt must lie in (0, 0.01], got {self.dt}")
        if self.t_end <= 0.0 or self.sample_every < 1:
            raise ConfigError("--t-end must be > 0 and --sample-every >= 1")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"--boundary must be one of {BOUNDARIES}")
        return self

    def params(self, eps: float | None = None) -> DimerParams:
        return DimerParams(self.w, self.eps if eps is None else eps, self.I0)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            K=self.K, h=self.h, T=self.T, z_tol=self.z_tol, theta_tol=self.theta_tol,
            jump_tol=self.jump_tol, max_iter=self.max_iter,
        )


def _fmt(x) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([v if isinstance(v, (int, np.integer, str)) else _fmt(v) for v in row])


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {k: _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _write_summary(path: Path, summary: dict):
    with open(path, "w") as fh:
        json.dump(_to_builtin(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- commands


def run_dispersion(cfg: RunConfig) -> int:
    w = cfg.w
    s0 = find_s0(w)
    c0_sq = sonic_speed_sq(w)
    rows = []
    for eps in (0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001):
        lam0, s1 = perturbed_eigenvalues(w, eps, s0)
        rows.append((eps, lam0, lam0 / eps, s1, s1 - s0))
    _write_csv(cfg.output_dir / "dispersion.csv", ["eps", "lambda0", "lambda0_over_eps", "s1", "s1_minus_s0"], rows)
    summary = {
        "command": "dispersion",
        "w": w,
        "c0_sq": c0_sq,
        "s0": s0,
        "char_residual": abs(char_function(1j * s0, c0_sq, w)),
        "identity_residual": resonance_identity(s0, w),
        "c31": normal_form_c31(w),
        "sqrt_2c31": float(np.sqrt(2.0 * normal_form_c31(w))),
    }
    _write_summary(cfg.output_dir / "summary.json", summary)
    return EXIT_OK


def _profile_rows(con: Construction, n: int = 4001):
    ctx = con.ctx
    tau = np.linspace(-ctx.T, ctx.T, n)
    X = con.wave(tau)
    u1 = con.wave.u1(tau)
    x1 = con.profile.x1(tau)
    x2 = con.profile.x2(tau)
    for i, t in enumerate(tau):
        yield (t, u1[i], X[0, i].real, X[0, i].imag, X[1, i].real, X[1, i].imag, X[2, i].real, X[2, i].imag,
               X[3, i].real, X[3, i].imag, x1[i], x2[i])


PROFILE_HEADER = ["tau", "u1", "u2re", "u2im", "u3re", "u3im", "u4re", "u4im", "u5re", "u5im", "x1", "x2"]


def run_construct(cfg: RunConfig, out: Path | None = None) -> tuple[int, Construction]:
    out = out or cfg.output_dir
    con = construct(cfg.params(), options=cfg.solver_options())
    _write_csv(out / "profile.csv", PROFILE_HEADER, _profile_rows(con))
    summary = {"command": "construct", **con.summary()}
    _write_summary(out / "summary.json", summary)
    return EXIT_OK, con


def run_simulate(cfg: RunConfig) -> int:
    con = construct(cfg.params(), options=cfg.solver_options())
    state = profile_state(con.profile, cfg.n_sites, cfg.launch, cfg.w, cfg.boundary)
    steps = int(round(cfg.t_end / cfg.dt))
    traj = integrate(state, cfg.dt, steps, sample_every=cfg.sample_every)
    traj.write_csv(cfg.output_dir / "trajectory.csv")
    summary = {
        "command": "simulate",
        "w": cfg.w,
        "eps": cfg.eps,
        "I0": cfg.I0,
        "c": con.profile.c,
        "n_sites": cfg.n_sites,
        "launch": cfg.launch,
        "dt": cfg.dt,
        "steps": steps,
        "boundary": cfg.boundary,
        "measured_speed": measure_speed(traj) if traj.times.size > 1 else None,
    }
    _write_summary(cfg.output_dir / "summary.json", summary)
    return EXIT_OK


def _check(name, value, tol, passed=None, gating=True):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": float(value), "tol": float(tol), "passed": ok, "gating": gating}


def verification_checks(cfg: RunConfig, con: Construction, eps: float) -> list[dict]:
    """Run the invariant suite on one constructed wave."""
    w = cfg.w
    ctx = con.ctx
    k = ctx.k
    checks = []

    c0_sq = sonic_speed_sq(w)
    checks.append(_check("dispersion_root", abs(char_function(1j * k.s0, c0_sq, w)), 1e-12))
    checks.append(_check("resonance_identity", resonance_identity(k.s0, w), 1e-9))

    basis = build_basis(w)
    checks.append(_check("projection_duality", np.max(np.abs(basis.duality_matrix() - np.eye(5))), 1e-6))

    H = HomoclinicH(eps, k)
    tau = np.linspace(-40.0 / eps, 40.0 / eps, 1001)
    checks.append(_check("homoclinic_exactness", np.max(np.abs(dominant_field(H(tau), eps, k) - H.derivative(tau))), 1e-12))

    fund = FundamentalSet(eps, k)
    sample = np.linspace(-40.0 / eps, 40.0 / eps, 9)
    bio = max(np.max(np.abs(fund.pairing_precise(t) - np.eye(5))) for t in sample)
    checks.append(_check("biorthogonality", bio, 1e-9))

    Z = con.Z
    checks.append(_check("contraction_ratio", Z.contraction_ratio, 0.5))
    checks.append(_check("picard_iterations", Z.iterations, 60))
    checks.append(_check("matching_jump", float(np.max(np.abs(con.wave.jump))), 1e-9))
    checks.append(_check("theta_over_eps", abs(con.theta) / eps, 10.0))

    p = con.profile
    t = np.linspace(0.0, 0.9 * ctx.T, 2001)
    odd = max(np.max(np.abs(p.x1(t) + p.x1(-t))), np.max(np.abs(p.x2(t) + p.x2(-t))))
    checks.append(_check("profile_oddness", odd, 1e-9))

    window = np.linspace(-10.0 / eps, 10.0 / eps, 4001)
    full = advance_delay_residual(p, window, w)["linf"]
    core = advance_delay_residual(core_profile(w, eps), window, w)["linf"]
    checks.append(_check("residual_below_core_only", full / core, 1.0, passed=full < core))

    fi = [first_integral(p, a, w) for a in (0.0, 10.0 / eps)]
    drift = abs(fi[1] - fi[0])
    checks.append(_check("first_integral_constancy", drift, 1e-6 * eps**2, gating=cfg.strict))

    if cfg.simulate:
        state = profile_state(p, cfg.n_sites, cfg.launch, w, cfg.boundary)
        steps = int(round(cfg.t_end / cfg.dt))
        traj = integrate(state, cfg.dt, steps, sample_every=max(steps // 10, 1))
        amp = np.max(np.abs(p.x1(window)))
        odd_sites = traj.sites % 2 == 1
        err = 0.0
        for tt, y in zip(traj.times, traj.y):
            arg = traj.sites - cfg.launch - p.c * tt
            ref = np.where(odd_sites, p.x1(arg), p.x2(arg))
            core_mask = np.abs(arg) <= 3.0 / ctx.H.decay_rate
            err = max(err, float(np.max(np.abs(y - ref)[core_mask])))
        checks.append(_check("simulated_core_shape", err / amp, 0.05))
        checks.append(_check("simulated_speed", abs(measure_speed(traj) / p.c - 1.0), 0.01))
    return checks


def run_verify(cfg: RunConfig, out: Path | None = None, eps: float | None = None) -> int:
    out = out or cfg.output_dir
    eps = cfg.eps if eps is None else eps
    con = construct(cfg.params(eps), options=cfg.solver_options())
    checks = verification_checks(cfg, con, eps)
    failed = [c["name"] for c in checks if c["gating"] and not c["passed"]]
    report = {
        "command": "verify",
        **con.summary(),
        "checks": checks,
        "failed": failed,
        "passed": not failed,
    }
    _write_summary(out / "summary.json", report)
    _write_csv(out / "report.csv", ["name", "value", "tol", "passed", "gating"],
               [(c["name"], c["value"], c["tol"], str(c["passed"]), str(c["gating"])) for c in checks])
    return EXIT_OK if not failed else EXIT_VERIFY


def _sweep_one(args):
    cfg, eps = args
    sub = cfg.output_dir / f"eps_{eps:g}"
    sub.mkdir(parents=True, exist_ok=True)
    try:
        run_construct(_with(cfg, eps=eps), sub)
        code = run_verify(cfg, sub, eps)
    except NanokitError as exc:
        return eps, exit_code_for(exc), f"{type(exc).__name__}: {exc}"
    return eps, code, ""


def _with(cfg: RunConfig, **changes) -> RunConfig:
    data = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    data.update(changes)
    return RunConfig(**data)


def run_sweep(cfg: RunConfig) -> int:
    jobs = [(cfg, float(e)) for e in cfg.eps_list]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = sorted(results)
    _write_csv(cfg.output_dir / "sweep.csv", ["eps", "exit_code", "error"], rows)
    _write_summary(cfg.output_dir / "summary.json", {
        "command": "sweep",
        "w": cfg.w,
        "I0": cfg.I0,
        "runs": [{"eps": e, "exit_code": c, "error": m} for e, c, m in rows],
    })
    return max(c for _, c, _ in rows)


# ---------------------------------------------------------------- parsing


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, GridTooCoarse)):
        return EXIT_CONFIG
    return EXIT_SOLVER


def _eps_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nanokit", description="Diatomic FPUT nanopteron toolkit.")
    parser.add_argument("--version", action="version", version=f"nanokit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--w", type=float, default=2.0, help="mass ratio m1/m2 (> 1)")
    common.add_argument("--output-dir", type=Path, default=None,
                        help="output directory (default: $NANOKIT_OUTPUT_DIR or ./nanokit-out)")

    wave = argparse.ArgumentParser(add_help=False)
    wave.add_argument("--eps", type=float, default=0.1, help="speed perturbation, c^2 = c0^2 + eps^2")
    wave.add_argument("--I0", type=float, default=1.0, help="ripple scale, I = eps^4 I0")
    wave.add_argument("--T", type=float, default=None, help="half-line length (default 25/kappa)")
    wave.add_argument("--h", type=float, default=None, help="grid step")
    wave.add_argument("--K", type=int, default=7, help="Fourier harmonics of the periodic orbit")
    wave.add_argument("--z-tol", type=float, default=1e-12)
    wave.add_argument("--theta-tol", type=float, default=1e-14)
    wave.add_argument("--jump-tol", type=float, default=1e-9)
    wave.add_argument("--max-iter", type=int, default=200)

    chain = argparse.ArgumentParser(add_help=False)
    chain.add_argument("--n-sites", type=int, default=2048)
    chain.add_argument("--launch", type=int, default=512)
    chain.add_argument("--t-end", type=float, default=100.0)
    chain.add_argument("--dt", type=float, default=0.01)
    chain.add_argument("--boundary", choices=BOUNDARIES, default="damped-sponge")

    sub.add_parser("dispersion", parents=[common], help="sonic resonance and eigenvalue tables")
    sub.add_parser("construct", parents=[common, wave], help="build the nanopteron profile")
    sim = sub.add_parser("simulate", parents=[common, wave, chain], help="integrate the chain from the profile")
    sim.add_argument("--sample-every", type=int, default=1000)
    for name, helptext in (("verify", "run the invariant suite"), ("sweep", "construct and verify over eps")):
        p = sub.add_parser(name, parents=[common, wave, chain], help=helptext)
        p.add_argument("--strict", action="store_true", help="let first-integral constancy gate the exit code")
        p.add_argument("--no-simulate", dest="simulate", action="store_false", help="skip the chain simulation check")
        if name == "sweep":
            p.add_argument("--eps-list", type=_eps_list, default=[0.1, 0.05])
            p.add_argument("--workers", type=int, default=1)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    out = ns.output_dir or Path(os.environ.get("NANOKIT_OUTPUT_DIR", "nanokit-out"))
    known = {f.name for f in fields(RunConfig)}
    data = {k: v for k, v in vars(ns).items() if k in known and k != "output_dir"}
    return RunConfig(output_dir=Path(out), **data).validate()


def run(cfg: RunConfig) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if cfg.command == "dispersion":
        return run_dispersion(cfg)
    if cfg.command == "construct":
        return run_construct(cfg)[0]
    if cfg.command == "simulate":
        return run_simulate(cfg)
    if cfg.command == "verify":
        return run_verify(cfg)
    return run_sweep(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        code = run(cfg)
    except NanokitError as exc:
        print(f"nanokit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    if code == EXIT_VERIFY:
        print("nanokit: verification failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
