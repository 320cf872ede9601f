"""Benchmark presets and the Monte-Carlo experiment harness.

Three stock models exercise the estimator across the regimes it targets:

* ``clock-ensemble``   unobservable LTI model of three two-state clocks
                       measured through pairwise phase differences; eight
                       covariance parameters spanning many decades.
* ``unobs-unknown-input``  unobservable LTV model identified without access
                       to the input sequence.
* ``obs-ltv``          small observable LTV model where both the ordinary
                       and the weighted solver are cheap enough to compare.

``run_mc`` repeats simulate-then-identify cycles with per-run seeds
(seed + run index) and reports sample statistics of the estimates.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .estimator import (
    _compute_obs,
    _design_rank,
    _equilibrated,
    _pipeline_from_system,
    build_design,
)
from .errors import MdmError, RankDeficientDesign
from .linalg import Tolerance, DEFAULT_TOL
from .model import (
    KNOWN_INPUT,
    NO_INPUT,
    UNKNOWN_INPUT,
    InitialCondition,
    LtvModel,
    MeasurementData,
    NoiseStructure,
    simulate,
)

__all__ = ["BenchmarkSpec", "McResult", "PRESET_NAMES", "preset",
           "benchmark_input_signal", "run_mc", "emit_table", "emit_plot_data"]

PRESET_NAMES = ("clock-ensemble", "unobs-unknown-input", "obs-ltv")


@dataclass
class BenchmarkSpec:
    name: str
    model: LtvModel
    structure: NoiseStructure
    alpha_true: np.ndarray
    L: int
    mode: str
    tau: int
    n_mc: int
    seed: int
    init: InitialCondition


@dataclass
class McResult:
    estimates: np.ndarray               # (n_mc, n_alpha)
    sample_mean: np.ndarray
    sample_cov_diag: np.ndarray
    mean_est_cov_diag: np.ndarray | None
    wall_time_per_run: float
    method: str
    n_mc: int


def _clock_ensemble(tau: int, n_mc: int, seed: int) -> BenchmarkSpec:
    ts = 10.0
    f_cell = np.array([[1.0, ts], [0.0, 1.0]])
    wiener = np.array([[ts ** 3 / 3.0, ts ** 2 / 2.0], [ts ** 2 / 2.0, ts]])
    white = np.array([[ts, 0.0], [0.0, 0.0]])
    model = LtvModel.create(
        n_x=6, n_w=6, n_v=2, tau=tau,
        F=np.kron(np.eye(3), f_cell),
        G=np.zeros((6, 1)),
        E=np.eye(6),
        H=np.array([[1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
                    [1.0, 0.0, 0.0, 0.0, -1.0, 0.0]]),
        D=np.eye(2),
    )
    zero2 = np.zeros((2, 2))
    zero6 = np.zeros((6, 6))
    pairs = []
    for clock in range(3):
        sel = np.zeros((3, 3))
        sel[clock, clock] = 1.0
        pairs.append((np.kron(sel, wiener), zero2))
        pairs.append((np.kron(sel, white), zero2))
    pairs.append((zero6, np.diag([1.0, 0.0])))
    pairs.append((zero6, np.diag([0.0, 1.0])))
    alpha = 1e-19 * np.array([6.0, 0.05, 20.0, 0.3, 7.0, 0.04, 80.0, 100.0])
    return BenchmarkSpec(
        name="clock-ensemble", model=model,
        structure=NoiseStructure.from_pairs(pairs), alpha_true=alpha,
        L=10, mode=NO_INPUT, tau=tau, n_mc=n_mc, seed=seed,
        init=InitialCondition.default(6),
    )


def _unobs_unknown_input(tau: int, n_mc: int, seed: int) -> BenchmarkSpec:
    g_seq = [np.array([[0.0], [np.sin(10.0 * k / tau)], [1.0]])
             for k in range(tau + 1)]
    model = LtvModel.create(
        n_x=3, n_w=3, n_v=3, tau=tau,
        F=np.array([[1.0, 2.0, 1.0], [0.0, -1.01, 2.0], [0.0, 0.0, 1.0]]),
        G=g_seq,
        E=np.array([[-3.0, 2.0, 0.0], [2.0, 2.0, 2.0], [5.0, 0.0, 1.0]]),
        H=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0], [0.0, 1.0, 1.0]]),
        D=np.array([[1.0, 1.0, 0.0], [0.0, 2.0, 1.0], [1.0, 0.0, -1.0]]),
    )
    zero3 = np.zeros((3, 3))
    pairs = [
        (np.eye(3), zero3),
        (np.diag([0.0, 1.0, 1.0]), zero3),
        (np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, -1.0, 0.0]]), zero3),
        (zero3, np.diag([1.0, 0.0, 1.0])),
        (zero3, np.diag([0.0, 2.0, 0.0])),
        (zero3, np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])),
    ]
    alpha = np.array([1.0, 1.0, -1.0, 2.0, 2.0, 1.0])
    return BenchmarkSpec(
        name="unobs-unknown-input", model=model,
        structure=NoiseStructure.from_pairs(pairs), alpha_true=alpha,
        L=2, mode=UNKNOWN_INPUT, tau=tau, n_mc=n_mc, seed=seed,
        init=InitialCondition.default(3),
    )


def _obs_ltv(tau: int, n_mc: int, seed: int) -> BenchmarkSpec:
    f_seq = [np.array([[0.8 - 0.1 * np.sin(7.0 * np.pi * k / tau)]])
             for k in range(tau + 1)]
    h_seq = [np.array([[1.0 + 0.99 * np.sin(100.0 * np.pi * k / tau)]])
             for k in range(tau + 1)]
    one = np.array([[1.0]])
    zero = np.array([[0.0]])
    model = LtvModel.create(n_x=1, n_w=1, n_v=1, tau=tau,
                            F=f_seq, G=one, E=one, H=h_seq, D=one)
    structure = NoiseStructure.from_pairs([(one, zero), (zero, one)])
    return BenchmarkSpec(
        name="obs-ltv", model=model, structure=structure,
        alpha_true=np.array([2.0, 1.0]),
        L=2, mode=KNOWN_INPUT, tau=tau, n_mc=n_mc, seed=seed,
        init=InitialCondition.default(1),
    )


_PRESETS = {
    "clock-ensemble": _clock_ensemble,
    "unobs-unknown-input": _unobs_unknown_input,
    "obs-ltv": _obs_ltv,
}


def preset(name: str, *, tau: int = 1000, n_mc: int = 500, seed: int = 0) -> BenchmarkSpec:
    """Stock benchmark by name; tau / n_mc / seed are desk-scale defaults."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset '{name}'; choose from {PRESET_NAMES}")
    return _PRESETS[name](tau, n_mc, seed)


def benchmark_input_signal(spec: BenchmarkSpec) -> np.ndarray | None:
    """The scalar input u_k = sin(k / tau) applied by every benchmark run."""
    if spec.mode == NO_INPUT:
        return None
    return np.sin(np.arange(spec.tau + 1) / spec.tau)[:, None]


def _estimator_mode(spec_mode: str) -> str:
    return UNKNOWN_INPUT if spec_mode == UNKNOWN_INPUT else KNOWN_INPUT


def _run_range(spec: BenchmarkSpec, method: str, indices, tol: Tolerance):
    """Identify runs ``indices``; geometry and the design QR are built once."""
    mode = _estimator_mode(spec.mode)
    sys0 = build_design(spec.model, spec.structure, spec.L, mode, tol,
                        n_windows=spec.tau + 2 - spec.L)
    d, scale = _equilibrated(sys0.design, tol)
    rank, _, _ = _design_rank(d, tol)
    if rank < sys0.n_alpha:
        raise RankDeficientDesign(rank, sys0.n_alpha)
    q_fac, r_fac = scipy.linalg.qr(d, mode="economic")
    u_sim = benchmark_input_signal(spec)
    include_u = spec.mode == KNOWN_INPUT and spec.model.has_input

    alphas = np.empty((len(indices), spec.structure.n_alpha))
    ecovs = np.empty_like(alphas) if method == "weighted" else None
    elapsed = 0.0
    for row, i in enumerate(indices):
        traj = simulate(spec.model, spec.structure, spec.alpha_true, spec.init,
                        input_signal=u_sim, seed=spec.seed + i)
        data = MeasurementData.from_trajectory(traj, include_u=include_u)
        t0 = time.perf_counter()
        try:
            obs = _compute_obs(sys0.windows, data, spec.L, mode)
            if method == "ordinary":
                beta = scipy.linalg.solve_triangular(r_fac, q_fac.T @ obs)
                alphas[row] = beta / scale
            else:
                est = _pipeline_from_system(replace(sys0, obs=obs),
                                            spec.structure, tol)
                alphas[row] = est.alpha_hat
                ecovs[row] = np.diag(est.cov)
        except MdmError as exc:
            exc.args = (f"run with seed {spec.seed + i} failed: {exc}",)
            raise
        elapsed += time.perf_counter() - t0
    return alphas, ecovs, elapsed


def _mc_worker(payload):
    spec, method, indices, tol = payload
    return _run_range(spec, method, indices, tol)


def run_mc(spec: BenchmarkSpec, method: str = "ordinary",
           n_mc: int | None = None, workers: int = 1,
           tol: Tolerance = DEFAULT_TOL) -> McResult:
    """Monte-Carlo evaluation: n_mc simulate-identify cycles, seeds seed+i.

    Statistics are computed from the estimates in run-index order, so results
    are deterministic for a fixed spec and seed regardless of worker count.
    """
    if method not in ("ordinary", "weighted"):
        raise ValueError("method must be 'ordinary' or 'weighted'")
    n_mc = spec.n_mc if n_mc is None else int(n_mc)
    indices = np.arange(n_mc)
    if workers > 1 and n_mc > 1:
        chunks = np.array_split(indices, min(workers, n_mc))
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_mc_worker,
                                  [(spec, method, c, tol) for c in chunks]))
        alphas = np.vstack([p[0] for p in parts])
        ecovs = np.vstack([p[1] for p in parts]) if method == "weighted" else None
        elapsed = sum(p[2] for p in parts)
    else:
        alphas, ecovs, elapsed = _run_range(spec, method, indices, tol)
    return McResult(
        estimates=alphas,
        sample_mean=alphas.mean(axis=0),
        sample_cov_diag=alphas.var(axis=0, ddof=1) if n_mc > 1 else np.zeros(alphas.shape[1]),
        mean_est_cov_diag=ecovs.mean(axis=0) if ecovs is not None else None,
        wall_time_per_run=elapsed / max(n_mc, 1),
        method=method,
        n_mc=n_mc,
    )


def _table_rows(result: McResult, spec: BenchmarkSpec):
    rows = []
    for i in range(spec.alpha_true.size):
        row = {
            "param": f"alpha_{i + 1}",
            "true": spec.alpha_true[i],
            "s_mean": result.sample_mean[i],
            "s_cov": result.sample_cov_diag[i],
        }
        if result.mean_est_cov_diag is not None:
            row["est_cov"] = result.mean_est_cov_diag[i]
        rows.append(row)
    return rows


def emit_table(result: McResult, spec: BenchmarkSpec, out_dir) -> tuple[str, str]:
    """Write `<name>_<method>_table.txt` and `.csv` under out_dir.

    The volatile wall-clock value appears only in the text table; the CSV
    keeps a label-only runtime footer so reruns are byte-identical.
    """
    rows = _table_rows(result, spec)
    columns = list(rows[0].keys())
    txt_path = f"{out_dir}/{spec.name}_{result.method}_table.txt"
    csv_path = f"{out_dir}/{spec.name}_{result.method}_table.csv"

    widths = {c: max(len(c), 14) for c in columns}
    lines = [f"{spec.name}  method={result.method}  n_mc={result.n_mc}"]
    lines.append("  ".join(f"{c:>{widths[c]}}" for c in columns))
    for row in rows:
        cells = [f"{row['param']:>{widths['param']}}"]
        cells += [f"{row[c]:>{widths[c]}.6e}" for c in columns[1:]]
        lines.append("  ".join(cells))
    lines.append(f"runtime_per_run_s  {result.wall_time_per_run:.6e}")
    with open(txt_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row["param"]] + [f"{row[c]:.12e}" for c in columns[1:]])
        writer.writerow(["runtime_per_run_s"] + [""] * (len(columns) - 1))
    return txt_path, csv_path


def emit_plot_data(result: McResult, spec: BenchmarkSpec, out_dir) -> str:
    """Write `<name>_<method>_runs.csv`: true values plus one row per run."""
    path = f"{out_dir}/{spec.name}_{result.method}_runs.csv"
    header = ["run"] + [f"alpha_{i + 1}" for i in range(spec.alpha_true.size)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerow(["true"] + [repr(float(v)) for v in spec.alpha_true])
        for i, est in enumerate(result.estimates):
            writer.writerow([str(i)] + [repr(float(v)) for v in est])
    return path
