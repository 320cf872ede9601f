"""Command-line interface.

Subcommands: identify, simulate, benchmark, identifiability.  Exit codes:
0 success, 2 usage, 3 validation, 4 numerical (rank / annihilator / weight),
5 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .benchmarks import PRESET_NAMES, emit_plot_data, emit_table, preset, run_mc
from .errors import (
    DataError,
    IndefiniteWeight,
    MdmError,
    NoAnnihilator,
    NotPositiveSemidefinite,
    RankDeficientDesign,
    ValidationError,
)
from .estimator import (
    _pipeline_from_system,
    build_design,
    build_stacked_system,
    identifiability_report,
    min_feasible_window,
    ordinary_mdm,
)
from .linalg import Tolerance
from .model import (
    KNOWN_INPUT,
    UNKNOWN_INPUT,
    LtvModel,
    MatrixSequence,
    MeasurementData,
    assemble_qr,
    simulate,
    validate,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


def _tolerance(args) -> Tolerance:
    return Tolerance(rank_tol=args.rank_tol, zero_tol=args.zero_tol)


def _mode(args) -> str:
    return KNOWN_INPUT if args.input_mode == "known" else UNKNOWN_INPUT


def _resolve_l(args, model, mode, tol, n_records, structure=None) -> int:
    if args.L != "auto":
        return int(args.L)
    if structure is not None:
        found = min_feasible_window(model, mode, tol, n_records=n_records,
                                    structure=structure)
        if found is not None:
            return found
        # no window makes every parameter identifiable; fall back to the
        # smallest window with an annihilator and let the solver report it
    found = min_feasible_window(model, mode, tol, n_records=n_records)
    if found is None:
        raise NoAnnihilator(rows=0, rank=0)
    return found


def _with_tau(model: LtvModel, tau: int) -> LtvModel:
    if tau == model.tau:
        return model
    if tau > model.tau:
        raise ValidationError(
            [f"requested tau={tau} exceeds the model horizon {model.tau}"]
        )

    def cut(seq):
        if seq.is_constant:
            return seq
        return MatrixSequence([seq[k] for k in range(tau + 1)], tau)

    return LtvModel(n_x=model.n_x, n_w=model.n_w, n_v=model.n_v, tau=tau,
                    F=cut(model.F), G=cut(model.G), E=cut(model.E),
                    H=cut(model.H), D=cut(model.D))


def _print_identifiability(report) -> None:
    print(f"identifiability: rank {report.rank} of {report.n_alpha} parameters "
          f"(threshold {report.threshold:.3e})")
    if report.null_basis is not None:
        print("unidentifiable directions (orthonormal basis columns):")
        for row, score in zip(report.null_basis, report.participation):
            cells = "  ".join(f"{v: .4e}" for v in row)
            print(f"  [{cells}]  participation {score:.3f}")


def cmd_identify(args) -> int:
    bundle = io.load_model(args.model)
    report = validate(bundle.model, bundle.structure)
    if not report.ok:
        raise ValidationError(report.findings)
    data = io.read_data(args.data)
    tol = _tolerance(args)
    mode = _mode(args)
    l_win = _resolve_l(args, bundle.model, mode, tol, n_records=len(data),
                       structure=bundle.structure)

    t0 = time.perf_counter()
    sys_full = build_stacked_system(bundle.model, bundle.structure, data,
                                    l_win, mode, tol)
    ident = identifiability_report(sys_full, tol)
    try:
        if args.method == "ordinary":
            est = ordinary_mdm(sys_full, tol)
        else:
            est = _pipeline_from_system(sys_full, bundle.structure, tol)
    except RankDeficientDesign:
        _print_identifiability(ident)
        raise
    wall = time.perf_counter() - t0

    q_hat, r_hat = assemble_qr(bundle.structure, est.alpha_hat)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = {
        "alpha_hat": est.alpha_hat.tolist(),
        "Q_hat": q_hat.tolist(),
        "R_hat": r_hat.tolist(),
        "method": est.method,
        "L": l_win,
        "input_mode": args.input_mode,
        "cov": est.cov.tolist() if est.cov is not None else None,
        "identifiability": {
            "rank": ident.rank,
            "n_alpha": ident.n_alpha,
            "threshold": ident.threshold,
            "participation": (ident.participation.tolist()
                              if ident.participation is not None else None),
        },
        "tolerances": {"rank_tol": tol.rank_tol, "zero_tol": tol.zero_tol},
    }
    result_path = out_dir / "identify_result.json"
    with open(result_path, "w") as fh:
        json.dump(result, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "identify_result.meta.json", "w") as fh:
        json.dump({"wall_time_s": wall}, fh)
        fh.write("\n")

    print(f"method: {est.method}   L={l_win}   mode={args.input_mode}")
    _print_identifiability(ident)
    print(f"{'param':>10} {'alpha_hat':>16}")
    for i, v in enumerate(est.alpha_hat):
        print(f"{'alpha_' + str(i + 1):>10} {v:>16.6e}")
    print(f"result written to {result_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    bundle = io.load_model(args.model)
    if bundle.alpha_true is None:
        raise ValidationError(["model file has no 'alpha_true'; cannot simulate"])
    report = validate(bundle.model, bundle.structure)
    if not report.ok:
        raise ValidationError(report.findings)
    model = _with_tau(bundle.model, args.tau) if args.tau else bundle.model

    u = None
    if args.input_signal != "none" and model.has_input:
        if args.input_signal == "sine":
            if any(model.n_u(k) != 1 for k in range(model.tau + 1)):
                raise ValidationError(
                    ["the sine input signal needs a scalar input; use "
                     "--input-signal zero or none"])
            ks = np.arange(model.tau + 1)
            u = np.sin(ks / max(model.tau, 1))[:, None]
        else:
            u = [np.zeros(model.n_u(k)) for k in range(model.tau + 1)]
    traj = simulate(model, bundle.structure, bundle.alpha_true, bundle.init,
                    input_signal=u, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / "data.jsonl"
    io.write_data(data_path, MeasurementData.from_trajectory(traj))
    with open(out_dir / "data.meta.json", "w") as fh:
        json.dump({"seed": args.seed, "model": str(args.model),
                   "tau": model.tau, "input_signal": args.input_signal}, fh)
        fh.write("\n")
    print(f"wrote {model.tau + 1} records to {data_path}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    spec = preset(args.preset, tau=args.tau, n_mc=args.n_mc, seed=args.seed)
    if args.preset == "clock-ensemble" and args.method == "weighted":
        print("note: weighted identification on the clock ensemble is expensive",
              file=sys.stderr)
    result = run_mc(spec, args.method, workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    txt_path, _ = emit_table(result, spec, out_dir)
    emit_plot_data(result, spec, out_dir)
    print(Path(txt_path).read_text(), end="")
    return EXIT_OK


def cmd_identifiability(args) -> int:
    bundle = io.load_model(args.model)
    report = validate(bundle.model, bundle.structure)
    if not report.ok:
        raise ValidationError(report.findings)
    tol = _tolerance(args)
    mode = _mode(args)
    l_win = _resolve_l(args, bundle.model, mode, tol,
                       n_records=bundle.model.tau + 1)
    sys0 = build_design(bundle.model, bundle.structure, l_win, mode, tol)
    _print_identifiability(identifiability_report(sys0, tol))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdmest",
        description="Noise covariance identification for linear state-space models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--rank-tol", type=float, default=1e-10)
        p.add_argument("--zero-tol", type=float, default=1e-8)
        p.add_argument("--out", default=".", help="output directory")

    p_id = sub.add_parser("identify", help="estimate Q/R parameters from data")
    p_id.add_argument("--model", required=True)
    p_id.add_argument("--data", required=True)
    p_id.add_argument("--L", default="auto", help="window length or 'auto'")
    p_id.add_argument("--method", choices=("ordinary", "weighted"),
                      default="ordinary")
    p_id.add_argument("--input-mode", choices=("known", "unknown"),
                      default="known")
    add_common(p_id)
    p_id.set_defaults(func=cmd_identify)

    p_sim = sub.add_parser("simulate", help="simulate a trajectory to a data file")
    p_sim.add_argument("--model", required=True)
    p_sim.add_argument("--tau", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--input-signal", choices=("sine", "zero", "none"),
                       default="sine")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("benchmark", help="run a Monte-Carlo benchmark")
    p_bench.add_argument("preset", choices=PRESET_NAMES)
    p_bench.add_argument("--method", choices=("ordinary", "weighted"),
                         default="ordinary")
    p_bench.add_argument("--n-mc", type=int, default=500)
    p_bench.add_argument("--tau", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--workers", type=int, default=1)
    add_common(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)

    p_ident = sub.add_parser("identifiability",
                             help="rank analysis of the design matrix (no data needed)")
    p_ident.add_argument("--model", required=True)
    p_ident.add_argument("--L", default="auto")
    p_ident.add_argument("--input-mode", choices=("known", "unknown"),
                         default="known")
    add_common(p_ident)
    p_ident.set_defaults(func=cmd_identifiability)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NoAnnihilator, RankDeficientDesign, IndefiniteWeight,
            NotPositiveSemidefinite, MdmError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
