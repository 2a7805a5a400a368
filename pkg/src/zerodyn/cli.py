"""Command-line interface: ``zerodyn {analyze,transform,simulate,zero-dynamics,verify}``.

Exit codes: 0 pass, 1 usage/config/I-O error, 2 assumption or invariant
failure, 3 integration failure.  Reports are JSON on stdout (and in
``--out`` when a file is produced); trajectories are CSV.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import blocklin, geomdiff, normalform, report, sim, verify
from . import model as _model
from .errors import DimensionMismatch, IntegrationFailure, InvalidParams, ZeroDynError

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_INTEGRATION = 0, 1, 2, 3
INVOLUTIVITY_POINTS = 100
DEVIATION_LIMIT = 1e-6


class ConfigError(Exception):
    """Bad flags, unreadable files or malformed input."""


@dataclass(frozen=True)
class RunConfig:
    model: str = "spacecraft"
    params_path: Optional[str] = None
    seed: int = 42
    samples: int = 1000
    step: float = 1e-3
    horizon: float = 10.0
    output_dir: Optional[str] = None

    def integrator(self):
        try:
            return sim.IntegratorConfig(step=self.step, horizon=self.horizon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def load_model(self):
        data = None
        if self.params_path is not None:
            try:
                with open(self.params_path) as fh:
                    data = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read params file: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"params file {self.params_path}: {exc}") from exc
        return _model.get_model(self.model, data)

    def path(self, name):
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)


def _vector(text, what):
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _emit(payload, cfg, name):
    text = report.dumps(payload)
    if cfg.output_dir is not None:
        with open(cfg.path(name), "w", newline="\n") as fh:
            fh.write(text)
    sys.stdout.write(text)


# analyze -----------------------------------------------------------------------


def cmd_analyze(cfg):
    """Assumption report: symmetry, involutivity, relative degree, ``p <= s <= r < n``."""
    model = cfg.load_model()
    rng = np.random.default_rng(cfg.seed)
    states = _model.sample_states(model, rng, cfg.samples)
    probes = geomdiff.probe_points(model, rng)
    p = model.p

    asym = max(blocklin.asymmetry(model.mass_matrix(x[p:])) for x in states)
    symmetry_ok = bool(asym <= blocklin.SYMMETRY_TOL)
    inv_points = states[:INVOLUTIVITY_POINTS]
    try:
        inv = geomdiff.involutivity_check(model, inv_points)
        involutive, inv_residual, excess = inv.involutive, inv.worst_residual, inv.worst_rank_excess
    except ZeroDynError:
        involutive, inv_residual, excess = False, None, None

    degrees, total, rank, assumption_ii_ok, consistent = None, None, None, False, False
    try:
        reps = [geomdiff.relative_degree(model, x) for x in probes]
        center = reps[0]
        degrees, total = list(center.r_i), center.r
        rank = geomdiff.numerical_rank(center.E, 1e-9)
        consistent = all(r.r_i == center.r_i and r.well_defined for r in reps)
        assumption_ii_ok = bool(consistent and geomdiff.assumption_ii(model, center))
    except ZeroDynError:
        pass

    ok = symmetry_ok and involutive and assumption_ii_ok
    payload = {
        "model": model.name,
        "seed": cfg.seed,
        "symmetry_ok": symmetry_ok,
        "involutive": involutive,
        "relative_degrees": degrees,
        "total_relative_degree": total,
        "decoupling_rank": rank,
        "assumption_ii_ok": assumption_ii_ok,
        "relative_degree_consistent": consistent,
        "residuals": {"symmetry": asym, "involutivity": inv_residual, "rank_excess": excess},
        "counts": {"symmetry_samples": len(states), "involutivity_points": len(inv_points), "probes": len(probes)},
        "dimensions": {"n": model.n, "p": p, "s": model.dims.s},
        "passed": ok,
    }
    _emit(payload, cfg, "analyze.json")
    return EXIT_OK if ok else EXIT_ASSUMPTION


# transform ---------------------------------------------------------------------


def _read_state_csv(path, row):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError(f"cannot read state CSV: {exc}") from exc
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]
    if not -len(rows) <= row < len(rows):
        raise ConfigError(f"state CSV has {len(rows)} data rows, asked for row {row}")
    try:
        return np.array([float(v) for v in rows[row]])
    except ValueError as exc:
        raise ConfigError(f"state CSV row {row}: {exc}") from exc


def cmd_transform(cfg, state):
    """Null basis and normal coordinates at one state."""
    model = cfg.load_model()
    x = _model.as_state(model, state)
    d = blocklin.decompose(model.mass_matrix(x[model.p:]), model.p)
    nb = blocklin.null_basis(d)
    ns = normalform.phi(model, x)
    payload = {"model": model.name, "state": x, "zeta": ns.zeta, "eta": ns.eta, "X": nb.X, "N": nb.N}
    _emit(payload, cfg, "transform.json")
    return EXIT_OK


# simulate ----------------------------------------------------------------------


def _policy(args, model):
    if args.policy == "linearizing":
        v = np.zeros(model.p) if args.v is None else _vector(args.v, "--v")
        if v.size not in (1, model.p):
            raise ConfigError(f"--v needs 1 or {model.p} values")
        return sim.Linearizing(np.broadcast_to(v, (model.p,)).copy())
    tau = np.zeros(model.p) if args.tau is None else _vector(args.tau, "--tau")
    if tau.size not in (1, model.p):
        raise ConfigError(f"--tau needs 1 or {model.p} values")
    return sim.OpenLoop(np.broadcast_to(tau, (model.p,)).copy())


def cmd_simulate(cfg, policy_args):
    model = cfg.load_model()
    x0 = model.x0 if policy_args.x0 is None else _vector(policy_args.x0, "--x0")
    x0 = _model.as_state(model, x0)
    policy = _policy(policy_args, model)
    traj = sim.simulate(model, x0, policy, cfg.integrator())
    out_dir = cfg.output_dir or "."
    csv_path = os.path.join(out_dir, "trajectory.csv")
    os.makedirs(out_dir, exist_ok=True)
    traj.to_csv(csv_path)
    y = traj.states[:, : model.dims.s] @ model.output_matrix.T
    summary = {
        "model": model.name,
        "policy": policy_args.policy,
        "steps": len(traj.times) - 1,
        "final_time": traj.times[-1],
        "max_abs_output": float(np.abs(y).max()),
        "max_abs_tau": float(np.abs(traj.inputs).max()),
    }
    if "params" in model.info:
        from .spacecraft import modal_energy

        energy = np.array([modal_energy(model.info["params"], x) for x in traj.states])
        summary["modal_energy"] = {"initial": energy[0], "min": energy.min(), "max": energy.max(), "final": energy[-1]}
    summary["artifacts"] = [csv_path]
    cfg = RunConfig(**{**cfg.__dict__, "output_dir": out_dir})
    _emit(summary, cfg, "simulate.json")
    return EXIT_OK


# zero dynamics -----------------------------------------------------------------


def zero_dynamics_report(model, eta0, icfg):
    """Oracle comparison, linearization spectrum and the Schur-form candidate."""
    cmp = sim.zero_dynamics_compare(model, eta0, icfg)
    m = model.n - model.p
    A = geomdiff.numeric_jacobian(lambda e: normalform.zero_dynamics_rhs(model, e), np.zeros(m))
    eig = np.linalg.eigvals(A)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    try:
        _, schur = sim.integrate_zero_dynamics(
            model, eta0, icfg, rhs=lambda t, e: normalform.zero_dynamics_rhs_schur(model, e)
        )
        schur_gap = float(np.abs(schur - cmp.closed_form_eta).max())
    except IntegrationFailure:
        schur_gap = float("nan")
    return cmp, {
        "max_deviation": cmp.max_deviation,
        "deviation_limit": DEVIATION_LIMIT,
        "max_abs_output_state": float(np.abs(cmp.full.states[:, : model.p]).max()),
        "eigenvalues": eig,
        "max_real_part": float(eig.real.max()),
        "stable": bool(np.all(eig.real < 0)),
        "eq38_vs_eq25_deviation": schur_gap,
    }


def cmd_zero_dynamics(cfg, eta0_text=None):
    model = cfg.load_model()
    eta0 = model.x0[model.p:] if eta0_text is None else _vector(eta0_text, "--eta0")
    if eta0.shape != (model.n - model.p,):
        raise DimensionMismatch(f"--eta0 needs {model.n - model.p} values")
    cmp, body = zero_dynamics_report(model, eta0, cfg.integrator())
    out_dir = cfg.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    closed_path = os.path.join(out_dir, "zero_dynamics_closed_form.csv")
    full_path = os.path.join(out_dir, "zero_dynamics_full.csv")
    _write_eta_csv(closed_path, cmp.times, cmp.closed_form_eta)
    cmp.full.to_csv(full_path)
    payload = {"model": model.name, "eta0": eta0, **body, "artifacts": [closed_path, full_path]}
    cfg = RunConfig(**{**cfg.__dict__, "output_dir": out_dir})
    _emit(payload, cfg, "zero_dynamics.json")
    return EXIT_OK if cmp.max_deviation <= DEVIATION_LIMIT else EXIT_ASSUMPTION


def _write_eta_csv(path, times, eta):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"eta_{i}" for i in range(eta.shape[1])])
        for t, row in zip(times, eta):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


# verify ------------------------------------------------------------------------


def cmd_verify(cfg):
    model = cfg.load_model()
    rep = verify.run(model, seed=cfg.seed, samples=cfg.samples, cfg=cfg.integrator())
    if cfg.output_dir is not None:
        rep["artifacts"] = [cfg.path("verify.json")]
    _emit(rep, cfg, "verify.json")
    return EXIT_OK if rep["passed"] else EXIT_ASSUMPTION


# parser ------------------------------------------------------------------------


def _common(parser):
    parser.add_argument("--model", default="spacecraft", help="registered model name")
    parser.add_argument("--params", dest="params_path", help="JSON parameter file")
    parser.add_argument("--seed", type=int, default=42, help="seed for numpy's PCG64 generator")
    parser.add_argument("--samples", type=int, default=1000, help="number of sampled states")
    parser.add_argument("--step", type=float, default=1e-3, help="RK4 step (s)")
    parser.add_argument("--horizon", type=float, default=10.0, help="simulated time (s)")
    parser.add_argument("--out", dest="output_dir", help="directory for reports and trajectories")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 rather than argparse's 2, which is taken."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="zerodyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("analyze", help="check the structural assumptions"))

    tr = sub.add_parser("transform", help="normal coordinates and null basis at a state")
    _common(tr)
    src = tr.add_mutually_exclusive_group(required=True)
    src.add_argument("--state", help="comma or space separated state vector")
    src.add_argument("--state-csv", help="CSV file holding states, one per row")
    tr.add_argument("--row", type=int, default=0, help="data row of --state-csv")

    sm = sub.add_parser("simulate", help="closed- or open-loop simulation")
    _common(sm)
    sm.add_argument("--policy", choices=("linearizing", "open-loop"), default="linearizing")
    sm.add_argument("--v", help="commanded output rate for the linearizing policy")
    sm.add_argument("--tau", help="constant input for the open-loop policy")
    sm.add_argument("--x0", help="initial state (defaults to the model's)")

    zd = sub.add_parser("zero-dynamics", help="closed-form zero dynamics against simulation")
    _common(zd)
    zd.add_argument("--eta0", help="initial internal state (defaults to the model's)")

    _common(sub.add_parser("verify", help="run the invariant suite"))
    return parser


def _run(args):
    if args.samples < 1:
        raise ConfigError("--samples must be positive")
    if args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    cfg = RunConfig(
        model=args.model,
        params_path=args.params_path,
        seed=args.seed,
        samples=args.samples,
        step=args.step,
        horizon=args.horizon,
        output_dir=args.output_dir,
    )
    if args.command == "analyze":
        return cmd_analyze(cfg)
    if args.command == "transform":
        state = _vector(args.state, "--state") if args.state is not None else _read_state_csv(args.state_csv, args.row)
        return cmd_transform(cfg, state)
    if args.command == "simulate":
        cfg.integrator()
        return cmd_simulate(cfg, args)
    if args.command == "zero-dynamics":
        cfg.integrator()
        return cmd_zero_dynamics(cfg, args.eta0)
    return cmd_verify(cfg)


def _fail(code, kind, exc, **extra):
    sys.stdout.write(report.dumps({"error": kind, "message": str(exc), **extra}))
    print(f"zerodyn: {exc}", file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, InvalidParams, DimensionMismatch, OSError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, exc)
    except IntegrationFailure as exc:
        return _fail(EXIT_INTEGRATION, "IntegrationFailure", exc, time=exc.time)
    except ZeroDynError as exc:
        return _fail(EXIT_ASSUMPTION, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
