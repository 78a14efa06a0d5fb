"""Command-line entry point: ``trialqpe <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .config import ExperimentConfig
from .errors import TrialQPEError
from .experiment import (
    build_instance,
    instance_cost,
    make_backend,
    run_experiment,
    write_schedule_counts,
    write_spectrum,
    write_trialset,
)
from .level_finder import success_probability_trial
from .params import asymptotic_parameters
from .reports import dumps_json, write_csv, write_json
from .trial_set import (
    build_level_subsequence,
    cardinality_scan,
    fit_cardinality_exponent,
    max_excited_components,
)

log = logging.getLogger("trialqpe")


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("trialqpe") / "configs" / f"{name}.json"))


def load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise TrialQPEError("--config is required for this subcommand")
    path = Path(args.config)
    if not path.exists() and not path.suffix:
        path = bundled_config(args.config)
    cfg = ExperimentConfig.load(path)
    if args.seed is not None:
        cfg = replace(cfg, execution=replace(cfg.execution, seed=args.seed))
    if args.backend is not None:
        cfg = replace(cfg, algorithm=replace(cfg.algorithm, backend=args.backend))
    return cfg


def out_dir(args, cfg=None) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(cfg.execution.out) if cfg is not None else Path("out")


def cmd_params(args) -> int:
    if args.config is not None:
        cfg = load_config(args)
        d = cfg.problem.d
        eps = cfg.problem.eps if args.eps is None else args.eps
        M = cfg.problem.M if cfg.problem.M is not None else args.M
        j = cfg.algorithm.j
    else:
        d, eps, M, j = args.d, args.eps, args.M, args.j
    if d is None or eps is None:
        raise TrialQPEError("params needs --d and --eps (or a config with problem.eps)")
    rec = asymptotic_parameters(d, eps, M, j, args.gamma, args.g)
    sys.stdout.write(dumps_json(rec.to_dict()))
    if args.out is not None:
        write_json(Path(args.out) / "params.json", rec.to_dict())
    return 0


def cmd_spectrum(args) -> int:
    cfg = load_config(args)
    inst = build_instance(cfg)
    path = write_spectrum(inst, out_dir(args, cfg))
    log.info("wrote %s (%d eigenvalues, %d distinct levels)", path, len(inst.spectrum), len(inst.reference))
    return 0


def cmd_trialset(args) -> int:
    cfg = load_config(args)
    inst = build_instance(cfg)
    path = write_trialset(inst, out_dir(args, cfg))
    log.info("wrote %s (|S| = %d, cutoff %.6g)", path, inst.trial.cardinality, inst.trial.cutoff)
    return 0


def cmd_schedule(args) -> int:
    cfg = load_config(args)
    inst = build_instance(cfg)
    out = out_dir(args, cfg)
    write_schedule_counts(inst, out)
    cost = instance_cost(inst)
    write_json(out / "cost.json", cost.to_dict())
    log.info("actual exponentials %d, bound %d", cost.exponentials, cost.bound_total)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args)
    status, report = run_experiment(cfg, out_dir(args, cfg), trials=args.trials)
    v = report.get("verification", {})
    log.info("status %s, estimates %s, C1=%s C2=%s", report["status"],
             report.get("estimates", {}).get("energies"), v.get("C1"), v.get("C2"))
    return status


def cmd_verify(args) -> int:
    cfg = load_config(args)
    trials = args.trials if args.trials is not None else (cfg.execution.trials or 100)
    status, report = run_experiment(cfg, out_dir(args, cfg), trials=trials)
    v = report.get("verification", {})
    st = report.get("success_trial", {})
    log.info("C1=%s C2=%s empirical %.4f bound %.4f", v.get("C1"), v.get("C2"),
             st.get("empirical", float("nan")), st.get("bound", float("nan")))
    if status == 0 and not v.get("passed", False):
        return 3
    return status


def cmd_scan(args) -> int:
    out = Path(args.out or "out")
    if args.kind == "cardinality":
        d_values = list(range(args.d_min, args.d_max + 1))
        scan = cardinality_scan(d_values, args.N, args.M, args.j)
        slope = fit_cardinality_exponent(scan)
        c_prime = build_level_subsequence(d_values[-1], args.M, args.j).c_prime
        m = max_excited_components(args.M, c_prime)
        write_csv(out / "scan.csv", ["d", "trial_set_size"], scan)
        write_json(out / "scan.json", {
            "N": args.N, "M": args.M, "j": args.j, "scan": scan,
            "fit_exponent": slope, "m_bound": m, "within_bound": slope <= m,
        })
        log.info("fit exponent %.3f, bound m = %d", slope, m)
        return 0
    cfg = load_config(args)
    inst = build_instance(cfg)
    backend = make_backend(inst)
    trials = args.trials or cfg.execution.trials or 100
    rows = []
    for r in args.r_values:
        rc = replace(inst.run_config, r=r)
        st = success_probability_trial(rc, backend, trials, inst.reference, workers=cfg.execution.workers)
        rows.append((r, st.empirical, st.bound, st.stderr, int(st.passed)))
    write_csv(out / "success_scan.csv", ["r", "empirical", "bound", "stderr", "passed"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON) or a bundled config name")
    common.add_argument("--seed", type=int, help="override execution.seed")
    common.add_argument("--backend", choices=("exact", "trotter"), help="override algorithm.backend")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="trialqpe", description="Low-lying eigenvalues of -1/2 Laplacian + V by repeated QPE.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", parents=[common], help="evaluate the asymptotic parameter formulas")
    p.add_argument("--d", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--gamma", type=float)
    p.add_argument("--g", type=float, help="g(d); default d^3")
    p.set_defaults(func=cmd_params)

    for name, fn, text in (
        ("spectrum", cmd_spectrum, "write spectrum.csv"),
        ("trialset", cmd_trialset, "write trialset.csv"),
        ("schedule", cmd_schedule, "write schedule.csv and cost.json"),
    ):
        sub.add_parser(name, parents=[common], help=text).set_defaults(func=fn)

    for name, fn, text in (
        ("run", cmd_run, "run the level search and write all artifacts"),
        ("verify", cmd_verify, "run, check C1/C2 and the success-probability bound"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--trials", type=int)
        p.set_defaults(func=fn)

    p = sub.add_parser("scan", parents=[common], help="trial-set cardinality or success-rate sweeps")
    p.add_argument("--kind", choices=("cardinality", "success"), default="cardinality")
    p.add_argument("--d-min", type=int, default=2)
    p.add_argument("--d-max", type=int, default=10)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--r-values", type=int, nargs="+", default=[2, 4, 8])
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except TrialQPEError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
