"""Command-line front end: data generation, training, solving, benchmarks.

Subcommands: ``gen-data``, ``train``, ``solve``, ``bench``.  Every command
echoes its effective parameters (including seeds) as ``# key=value`` lines
before doing any work, and all file outputs are UTF-8 CSV with
``#``-prefixed metadata, so a run can be reproduced from its own output.
Timing is printed to stdout only; files contain nothing that varies
between identically-seeded runs.

Training and evaluation frames never share seeds: generation uses the even
seeds ``2*(base+i)`` and benchmark evaluation the odd ``2*(base+i)+1``.

Exit codes: 0 success, 1 usage error, 2 infeasible instance, 3 budget
exhausted.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .bnb import (
    BudgetExceededError,
    SolveOptions,
    SolveReport,
    SolveStatus,
    solve_bnb,
    solve_exhaustive,
    write_trace_csv,
)
from .dataset import Dataset, label_trace, read_dataset, write_dataset
from .ibnb import IbnbReport, ThresholdPolicy, solve_ibnb
from .mlp import TrainConfig, init_model, load_model, save_model, train
from .scenario import ScenarioConfig, generate_frame, read_config_file

__all__ = [
    "ExperimentConfig",
    "UsageError",
    "InfeasibleInstanceError",
    "main",
    "cmd_gen_data",
    "cmd_train",
    "cmd_solve",
    "cmd_bench",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_BUDGET = 3

DEFAULT_BENCH_THETAS = (1e-7, 1e-12)
#: Latency/energy weight pairs swept by the benchmark.
WEIGHT_SWEEP = ((1.0, 0.0), (1.0, 0.25), (1.0, 0.5), (1.0, 0.75), (1.0, 1.0))


class UsageError(Exception):
    pass


class InfeasibleInstanceError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Resolved parameters of a solve/bench invocation."""

    scenario: ScenarioConfig
    frames: int
    solver: str
    model_path: str | None
    policy: ThresholdPolicy
    out_dir: str
    seed_base: int

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise UsageError(f"--frames must be >= 1, got {self.frames}")
        if self.solver not in ("bnb", "ibnb", "exhaustive"):
            raise UsageError(f"unknown solver {self.solver!r}")
        if self.solver == "ibnb" and not self.model_path:
            raise UsageError("solver 'ibnb' requires --model")


def train_seed(base: int, index: int) -> int:
    return 2 * (base + index)


def eval_seed(base: int, index: int) -> int:
    return 2 * (base + index) + 1


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _echo(pairs: list[tuple[str, object]]) -> list[str]:
    lines = [f"# {key}={value}" for key, value in pairs]
    for line in lines:
        print(line)
    return lines


def _config_pairs(cfg: ScenarioConfig) -> list[tuple[str, object]]:
    return [
        ("num_mds", cfg.num_mds),
        ("num_channels", cfg.num_channels),
        ("bandwidth_hz", _fmt(cfg.bandwidth_hz)),
        ("noise_power_w", _fmt(cfg.noise_power_w)),
        ("power_min_w", _fmt(cfg.power_range_w[0])),
        ("power_max_w", _fmt(cfg.power_range_w[1])),
        ("task_min_bits", _fmt(cfg.task_size_range_bits[0])),
        ("task_max_bits", _fmt(cfg.task_size_range_bits[1])),
        ("mean_gain", _fmt(cfg.mean_channel_gain)),
        ("lambda_t", _fmt(cfg.lambda_t)),
        ("lambda_e", _fmt(cfg.lambda_e)),
    ]


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, meta: list[str], header: str, rows: list[str]) -> None:
    _atomic_write(path, "\n".join([*meta, header, *rows]) + "\n")


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = read_config_file(args.config)
    seed_base = args.seed if args.seed is not None else cfg.rng_seed
    if cfg.num_channels < cfg.num_mds:
        raise InfeasibleInstanceError(
            f"config has {cfg.num_mds} devices but only {cfg.num_channels} channels"
        )
    pairs = [("command", "gen-data"), *_config_pairs(cfg),
             ("frames", args.frames), ("seed_base", seed_base)]
    meta = _echo(pairs)
    config_hash = hashlib.sha256("\n".join(meta).encode()).hexdigest()[:16]

    opts = SolveOptions(max_nodes=args.max_nodes)
    samples = []
    for i in range(args.frames):
        seed = train_seed(seed_base, i)
        frame = generate_frame(replace(cfg, rng_seed=seed))
        report = solve_bnb(frame, opts)
        if report.status is SolveStatus.INFEASIBLE:
            raise InfeasibleInstanceError(f"frame with seed {seed} is infeasible")
        if report.status is SolveStatus.BUDGET_EXHAUSTED:
            raise BudgetExceededError(f"frame with seed {seed} exhausted the node budget")
        samples.extend(label_trace(report, frame, frame_id=i))

    ds = Dataset(samples, cfg.num_mds, cfg.num_channels, config_hash=config_hash)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "dataset.csv")
    tmp = f"{out_path}.tmp"
    write_dataset(ds, tmp)
    os.replace(tmp, out_path)
    ratio = ds.positives / len(ds.samples)
    print(f"samples={len(ds.samples)} positives={ds.positives} "
          f"negatives={ds.negatives} positive_ratio={ratio:.4f}")
    print(f"wrote {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    ds = read_dataset(args.dataset)
    tc = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        positive_class_weight=args.pos_weight,
        validation_fraction=args.val_fraction,
        rng_seed=args.seed if args.seed is not None else 0,
    )
    meta = _echo([
        ("command", "train"),
        ("dataset", args.dataset),
        ("samples", len(ds.samples)),
        ("positives", ds.positives),
        ("m", ds.feature_len),
        ("learning_rate", _fmt(tc.learning_rate)),
        ("epochs", tc.epochs),
        ("batch_size", tc.batch_size),
        ("positive_class_weight",
         "auto" if tc.positive_class_weight is None else _fmt(tc.positive_class_weight)),
        ("validation_fraction", _fmt(tc.validation_fraction)),
        ("seed", tc.rng_seed),
    ])

    model = init_model(ds.feature_len, tc.rng_seed)
    trained, history = train(model, ds.feature_matrix(), ds.labels(), tc)

    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.txt")
    tmp = f"{model_path}.tmp"
    save_model(trained, tmp)
    os.replace(tmp, model_path)
    rows = [
        f"{epoch},{_fmt(tr)},{_fmt(va)}"
        for epoch, (tr, va) in enumerate(zip(history.train_loss, history.val_loss))
    ]
    _write_csv(os.path.join(args.out, "history.csv"), meta,
               "epoch,train_loss,val_loss", rows)
    if history.train_loss:
        print(f"final train_loss={history.train_loss[-1]:.6f} "
              f"val_loss={history.val_loss[-1]:.6f}")
    print(f"wrote {model_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

_REPORT_HEADER = (
    "solver,status,psi,nodes_searched,restarts,fell_back_to_exact,"
    "thresholds_tried,model_id"
)


def _report_row(solver: str, report: SolveReport | IbnbReport, extra: str = ",,,") -> str:
    psi = "" if report.best_psi is None else _fmt(report.best_psi)
    return f"{solver},{report.status.value},{psi},{report.nodes_searched},{extra}"


def _solution_columns(report) -> str:
    if report.best_x is None:
        return ","
    x = ";".join(str(int(v)) for v in report.best_x.ravel())
    l = ";".join(_fmt(v) for v in report.best_split.ravel())
    return f"{x},{l}"


def cmd_solve(args) -> int:
    cfg = read_config_file(args.config)
    seed = args.seed if args.seed is not None else cfg.rng_seed
    policy = ThresholdPolicy(theta0=args.theta[0] if args.theta else 1e-7,
                             delta_theta=args.delta_theta)
    exp = ExperimentConfig(cfg, 1, args.solver, args.model, policy, args.out, seed)
    meta = _echo([
        ("command", "solve"), *_config_pairs(cfg),
        ("solver", exp.solver), ("frame_seed", seed),
        ("theta0", _fmt(policy.theta0)), ("delta_theta", _fmt(policy.delta_theta)),
        ("model", args.model or ""),
    ])
    frame = generate_frame(replace(cfg, rng_seed=seed))
    opts = SolveOptions(max_nodes=args.max_nodes)

    n = cfg.num_mds * cfg.num_channels
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    if exp.solver == "bnb":
        report = solve_bnb(frame, opts)
        write_trace_csv(trace_path, [(None, 0, report.trace)], n)
        extra = ",,,"
    elif exp.solver == "exhaustive":
        report = solve_exhaustive(frame, opts)
        write_trace_csv(trace_path, [], n)
        extra = ",,,"
    else:
        model = load_model(exp.model_path)
        report = solve_ibnb(frame, model, policy, opts)
        write_trace_csv(
            trace_path,
            [(p.theta if p.theta is not None else 0.0, i, p.records)
             for i, p in enumerate(report.passes)],
            n,
        )
        thetas = ";".join(_fmt(t) for t in report.thresholds_tried)
        extra = (f"{report.restarts},{int(report.fell_back_to_exact)},"
                 f"{thetas},{report.model_id}")

    header = _REPORT_HEADER + ",x,l"
    row = _report_row(exp.solver, report, extra) + "," + _solution_columns(report)
    _write_csv(os.path.join(args.out, "report.csv"), meta, header, [row])
    print(f"status={report.status.value} psi={report.best_psi} "
          f"nodes={report.nodes_searched} wall_time_s={report.wall_time:.3f}")
    print(f"wrote {os.path.join(args.out, 'report.csv')}")

    if report.status is SolveStatus.INFEASIBLE:
        raise InfeasibleInstanceError(
            f"frame with seed {seed} is infeasible "
            f"({cfg.num_mds} devices, {cfg.num_channels} channels)"
        )
    if report.status is SolveStatus.BUDGET_EXHAUSTED:
        raise BudgetExceededError("node budget exhausted before optimality")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    cfg = read_config_file(args.config)
    seed_base = args.seed if args.seed is not None else cfg.rng_seed
    thetas = tuple(args.theta) if args.theta else DEFAULT_BENCH_THETAS
    policy0 = ThresholdPolicy(theta0=thetas[0], delta_theta=args.delta_theta)
    exp = ExperimentConfig(cfg, args.frames, "ibnb", args.model, policy0,
                           args.out, seed_base)
    meta = _echo([
        ("command", "bench"), *_config_pairs(cfg),
        ("frames", exp.frames), ("seed_base", seed_base),
        ("thetas", ";".join(_fmt(t) for t in thetas)),
        ("delta_theta", _fmt(args.delta_theta)),
        ("model", args.model),
    ])
    model = load_model(exp.model_path)
    opts = SolveOptions(max_nodes=args.max_nodes)

    def run_frame(frame):
        bnb_report = solve_bnb(frame, opts)
        if bnb_report.status is not SolveStatus.OPTIMAL:
            raise InfeasibleInstanceError(
                f"frame seed {frame.config.rng_seed}: {bnb_report.status.value}"
            )
        ibnb_reports = []
        for theta in thetas:
            policy = ThresholdPolicy(theta0=theta, delta_theta=args.delta_theta)
            rep = solve_ibnb(frame, model, policy, opts)
            if rep.status is not SolveStatus.OPTIMAL:
                raise InfeasibleInstanceError(
                    f"frame seed {frame.config.rng_seed}: {rep.status.value}"
                )
            ibnb_reports.append(rep)
        return bnb_report, ibnb_reports

    # Held-out frames: per-frame node counts and the node-count CDFs.
    bnb_nodes: list[int] = []
    ibnb_nodes: dict[float, list[int]] = {t: [] for t in thetas}
    for i in range(exp.frames):
        frame = generate_frame(replace(cfg, rng_seed=eval_seed(seed_base, i)))
        bnb_report, ibnb_reports = run_frame(frame)
        bnb_nodes.append(bnb_report.nodes_searched)
        for theta, rep in zip(thetas, ibnb_reports):
            ibnb_nodes[theta].append(rep.nodes_searched)

    os.makedirs(args.out, exist_ok=True)
    rows = [
        f"{i},{bnb_nodes[i]},{ibnb_nodes[thetas[0]][i]}"
        for i in range(exp.frames)
    ]
    _write_csv(os.path.join(args.out, "nodes_per_frame.csv"), meta,
               "frame,bnb_nodes,ibnb_nodes", rows)

    cdf_rows: list[str] = []

    def cdf_series(counts: list[int], solver: str, theta_text: str) -> None:
        for rank, value in enumerate(sorted(counts), start=1):
            cdf_rows.append(f"{value},{_fmt(rank / len(counts))},{solver},{theta_text}")

    cdf_series(bnb_nodes, "bnb", "")
    for theta in thetas:
        cdf_series(ibnb_nodes[theta], "ibnb", _fmt(theta))
    _write_csv(os.path.join(args.out, "node_cdf.csv"), meta,
               "nodes,cdf,solver,theta", cdf_rows)

    # Objective comparison across latency/energy weightings, first theta.
    sweep_rows: list[str] = []
    for lambda_t, lambda_e in WEIGHT_SWEEP:
        weighted = replace(cfg, lambda_t=lambda_t, lambda_e=lambda_e)
        psi_bnb, psi_ibnb = 0.0, 0.0
        for i in range(exp.frames):
            frame = generate_frame(replace(weighted, rng_seed=eval_seed(seed_base, i)))
            bnb_report, ibnb_report = run_frame_weights(frame, model, thetas[0],
                                                        args.delta_theta, opts)
            psi_bnb += bnb_report.best_psi
            psi_ibnb += ibnb_report.best_psi
        psi_bnb /= exp.frames
        psi_ibnb /= exp.frames
        sweep_rows.append(
            f"{_fmt(lambda_t)},{_fmt(lambda_e)},{_fmt(psi_bnb)},{_fmt(psi_ibnb)},"
            f"{_fmt(psi_ibnb / psi_bnb)}"
        )
    _write_csv(os.path.join(args.out, "weights_sweep.csv"), meta,
               "lambda_t,lambda_e,psi_bnb,psi_ibnb,ratio", sweep_rows)

    mean_bnb = float(np.mean(bnb_nodes))
    for theta in thetas:
        mean_ibnb = float(np.mean(ibnb_nodes[theta]))
        print(f"theta={theta:g}: mean_nodes ibnb={mean_ibnb:.1f} "
              f"bnb={mean_bnb:.1f} ratio={mean_ibnb / mean_bnb:.3f}")
    print(f"wrote 3 CSVs under {args.out}")
    return EXIT_OK


def run_frame_weights(frame, model, theta, delta_theta, opts):
    bnb_report = solve_bnb(frame, opts)
    if bnb_report.status is not SolveStatus.OPTIMAL:
        raise InfeasibleInstanceError(
            f"frame seed {frame.config.rng_seed}: {bnb_report.status.value}"
        )
    policy = ThresholdPolicy(theta0=theta, delta_theta=delta_theta)
    rep = solve_ibnb(frame, model, policy, opts)
    if rep.status is not SolveStatus.OPTIMAL:
        raise InfeasibleInstanceError(
            f"frame seed {frame.config.rng_seed}: {rep.status.value}"
        )
    return bnb_report, rep


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # map argparse's exit(2) onto exit 1
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mecoffload",
                     description="MEC offloading solvers and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, frames=False, solver=False, model=False, theta=False,
               dataset=False, training=False):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed (base) overriding the config file")
        p.add_argument("--max-nodes", type=int, default=500_000)
        if frames:
            p.add_argument("--frames", type=int, default=100)
        if solver:
            p.add_argument("--solver", default="bnb",
                           choices=("bnb", "ibnb", "exhaustive"))
        if model:
            p.add_argument("--model", default=None, help="trained model file")
        if theta:
            p.add_argument("--theta", type=float, action="append", default=None,
                           help="initial pruning threshold (repeatable)")
            p.add_argument("--delta-theta", type=float, default=1e-5)
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset CSV path")
        if training:
            p.add_argument("--epochs", type=int, default=100)
            p.add_argument("--learning-rate", type=float, default=1e-3)
            p.add_argument("--batch-size", type=int, default=128)
            p.add_argument("--pos-weight", type=float, default=None)
            p.add_argument("--val-fraction", type=float, default=0.1)

    p = sub.add_parser("gen-data", help="solve frames exactly and label the traces")
    p.add_argument("--config", required=True)
    common(p, frames=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the pruning classifier")
    common(p, dataset=True, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="solve one frame and dump report + trace")
    p.add_argument("--config", required=True)
    common(p, solver=True, model=True, theta=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="compare exact and learned-pruning searches")
    p.add_argument("--config", required=True)
    common(p, frames=True, model=True, theta=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceededError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
