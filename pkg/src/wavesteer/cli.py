"""Command-line entry point.

Subcommands: validate, simulate, steer, sweep, gramian.  Exit codes:
0 on success, 2 when the config fails validation, 3 when the solver
aborts.  Outputs are CSV files in the --out directory with 17 significant
digits, so identical configs produce identical bytes.
"""

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config, validate_config, with_sweep
from .dynamics import SolverAbort
from .gramian import ControlSignal, SteeringWindow, assemble_gramian
from .steering import (
    build_setup,
    run_steering,
    sweep,
    write_report,
    write_spectrum,
    write_trajectory,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ABORT = 3


def _load_and_validate(config_path: str):
    """Config or (None, exit code); prints each violated hypothesis."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None
    violations = validate_config(cfg)
    if violations:
        for message in violations:
            print(f"violation: {message}", file=sys.stderr)
        return None
    return cfg


def _cmd_validate(args) -> int:
    cfg = _load_and_validate(args.config)
    if cfg is None:
        return EXIT_INVALID
    print(f"{args.config}: valid")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _load_and_validate(args.config)
    if cfg is None:
        return EXIT_INVALID
    setup = build_setup(cfg)
    # span the base control over the whole horizon: no tail, no seam
    control = ControlSignal(
        semigroup=setup.semigroup,
        overlap=setup.overlap,
        window=SteeringWindow(cfg.model.horizon, cfg.deltas[0], cfg.quadrature_nodes),
        base=setup.base,
    )
    try:
        traj = setup.integrator.run(setup.history, control)
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    out = Path(args.out)
    write_trajectory(traj, setup.basis, out / "trajectory_simulate.csv")
    print(f"wrote {out / 'trajectory_simulate.csv'}")
    return EXIT_OK


def _cmd_steer(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    cfg = with_sweep(cfg, [args.alpha], [args.delta])
    violations = validate_config(cfg)
    if violations:
        for message in violations:
            print(f"violation: {message}", file=sys.stderr)
        return EXIT_INVALID
    setup = build_setup(cfg)
    try:
        outcome = run_steering(setup, args.alpha, args.delta)
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    out = Path(args.out)
    write_report([outcome.row], out / "report.csv")
    write_trajectory(outcome.trajectory, setup.basis, out / "trajectory_steer.csv")
    row = outcome.row
    print(
        f"alpha={row.alpha:g} delta={row.delta:g} "
        f"final_error={row.final_error:.6e} linear_residual={row.linear_residual:.6e} "
        f"nonlinear_perturbation={row.nonlinear_perturbation:.6e}"
    )
    print(f"wrote {out / 'report.csv'} and {out / 'trajectory_steer.csv'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_and_validate(args.config)
    if cfg is None:
        return EXIT_INVALID
    setup = build_setup(cfg)
    rows = sweep(setup)
    out = Path(args.out)
    write_report(rows, out / "report.csv")
    failures = [row for row in rows if row.status != "ok"]
    print(f"wrote {out / 'report.csv'} ({len(rows)} rows, {len(failures)} failed)")
    if failures and len(failures) == len(rows):
        return EXIT_ABORT
    return EXIT_OK


def _cmd_gramian(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    cfg = with_sweep(cfg, cfg.alphas, [args.delta])
    violations = validate_config(cfg)
    if violations:
        for message in violations:
            print(f"violation: {message}", file=sys.stderr)
        return EXIT_INVALID
    setup = build_setup(cfg)
    window = SteeringWindow(cfg.model.horizon, args.delta, cfg.quadrature_nodes)
    gram = assemble_gramian(setup.semigroup, setup.overlap, window)
    out = Path(args.out)
    write_spectrum(gram, out / "gramian_spectrum.csv")
    print(
        f"wrote {out / 'gramian_spectrum.csv'} "
        f"(q_min={gram.q_min:.6e}, q_max={gram.eigenvalues[-1]:.6e})"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavesteer",
        description=(
            "Simulate a damped wave model with memory, delay, and impulses, "
            "and steer its final state with regularized minimum-energy controls."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a config against the model hypotheses")
    p_validate.add_argument("config")
    p_validate.set_defaults(func=_cmd_validate)

    p_simulate = sub.add_parser("simulate", help="integrate with the base control only")
    p_simulate.add_argument("config")
    p_simulate.add_argument("--out", default="out", help="output directory")
    p_simulate.set_defaults(func=_cmd_simulate)

    p_steer = sub.add_parser("steer", help="one steering run at a given alpha and delta")
    p_steer.add_argument("config")
    p_steer.add_argument("--alpha", type=float, required=True, help="regularization weight")
    p_steer.add_argument("--delta", type=float, required=True, help="steering window width")
    p_steer.add_argument("--out", default="out", help="output directory")
    p_steer.set_defaults(func=_cmd_steer)

    p_sweep = sub.add_parser("sweep", help="steering grid over the configured alpha/delta lists")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", default="out", help="output directory")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_gram = sub.add_parser("gramian", help="dump the window Gramian spectrum")
    p_gram.add_argument("config")
    p_gram.add_argument("--delta", type=float, required=True, help="steering window width")
    p_gram.add_argument("--out", default="out", help="output directory")
    p_gram.set_defaults(func=_cmd_gramian)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
