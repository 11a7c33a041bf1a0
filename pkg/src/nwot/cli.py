"""Command-line interface: seeded, file-driven experiment runs.

Subcommands: gen, wasserstein, nw, fit, sweep, cluster, compare, da-demo.
Every run is deterministic given its arguments (seeds included); reports
are JSON files that differ between identical runs only in their timestamp.
Errors exit with status 2 and a single `error: ...` line on stderr. The
`compare` subcommand encodes its verdict in the exit status (10 = same,
11 = same components / different proportions, 12 = different components).
NWOT_THREADS caps solver restart parallelism (default: machine parallelism).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from nwot import __version__
from nwot.applications import Verdict, comparative_test, da_reweight, split_by_label
from nwot.clustering import assign, score
from nwot.datagen import preset, preset_names
from nwot.exact_ot import wasserstein
from nwot.fitting import FitConfig, fit_mixture, pi_error, recovery_metrics
from nwot.mode_count import nw_sweep
from nwot.nw import NwConfig, nw_measure
from nwot.reports import (
    make_report,
    read_points_csv,
    write_points_csv,
    write_report,
    _atomic_write_text,
)

_VERDICT_EXIT = {
    Verdict.SAME: 10,
    Verdict.SAME_COMPONENTS_DIFFERENT_PROPORTIONS: 11,
    Verdict.DIFFERENT_COMPONENTS: 12,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


def _nw_config(args, k=None) -> NwConfig:
    return NwConfig(
        k=k if k is not None else args.k,
        exponent=args.p,
        points_per_component=args.points_per_component,
        max_outer_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        restarts=args.restarts,
    )


def _add_solver_args(sub, restarts=5, ppc=32):
    sub.add_argument("--p", type=float, default=1.0, choices=[1.0, 2.0],
                     help="ground-cost exponent (default 1)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--restarts", type=int, default=restarts)
    sub.add_argument("--points-per-component", type=int, default=ppc,
                     dest="points_per_component")
    sub.add_argument("--max-iters", type=int, default=100, dest="max_iters")
    sub.add_argument("--tol", type=float, default=1e-6)


def _config_dict(args, skip=("func",)) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _maybe_report(args, command, results) -> None:
    if getattr(args, "report", None):
        write_report(args.report, make_report(command, _config_dict(args), results))


def _cmd_gen(args) -> int:
    data, labels = preset(args.preset, args.n, args.seed)
    write_points_csv(args.out, data, labels)
    print(f"wrote {len(data)} points ({args.preset}, seed {args.seed}) to {args.out}")
    return 0


def _cmd_wasserstein(args) -> int:
    a, _ = read_points_csv(args.a)
    b, _ = read_points_csv(args.b)
    value, plan = wasserstein(a, b, args.p)
    print(format(value, ".17g"))
    if args.plan:
        rows, cols = np.nonzero(plan.matrix)
        lines = ["source_index,target_index,mass"]
        lines += [
            f"{i},{j},{format(plan.matrix[i, j], '.17g')}"
            for i, j in zip(rows, cols)
        ]
        _atomic_write_text(args.plan, "\n".join(lines) + "\n")
    _maybe_report(args, "wasserstein", {"value": value})
    return 0


def _cmd_nw(args) -> int:
    a, _ = read_points_csv(args.a)
    b, _ = read_points_csv(args.b)
    res = nw_measure(a, b, _nw_config(args))
    print(format(res.value, ".17g"))
    print("pi1:", " ".join(format(v, ".6g") for v in res.pi1.values))
    print("pi2:", " ".join(format(v, ".6g") for v in res.pi2.values))
    _maybe_report(args, "nw", {
        "value": res.value,
        "pi1": res.pi1,
        "pi2": res.pi2,
        "trace": list(res.trace),
        "converged": res.converged,
    })
    return 0


def _cmd_fit(args) -> int:
    data, labels = read_points_csv(args.data)
    cfg = FitConfig(
        k=args.k,
        exponent=args.p,
        lambda_reg=args.lambda_reg,
        points_per_component=args.points_per_component,
        max_outer_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        restarts=args.restarts,
    )
    res = fit_mixture(data, cfg)
    print("objective:", format(res.objective, ".17g"))
    print("pi:", " ".join(format(v, ".6g") for v in res.model.proportions.values))
    results = {
        "objective": res.objective,
        "regularizer_value": res.regularizer_value,
        "pi": res.model.proportions,
        "component_means": [c.mean() for c in res.model.components],
        "trace": list(res.trace),
        "converged": res.converged,
    }
    if labels is not None:
        n_modes = int(labels.max()) + 1
        class_means = np.stack([
            data.points[labels == c].mean(axis=0) for c in range(n_modes)
        ])
        metrics = recovery_metrics(data, labels, class_means, res.model)
        scores = score(assign(data, res.model), labels)
        results["metrics"] = {
            "pi_error": metrics.pi_error,
            "avg_mean_error": metrics.avg_mean_error,
            "avg_cov_error": metrics.avg_cov_error,
            "missing_modes": list(metrics.missing_modes),
        }
        results["scores"] = {
            "purity": scores.purity, "nmi": scores.nmi, "ari": scores.ari,
        }
        print(f"pi_error: {metrics.pi_error:.6g}  purity: {scores.purity:.4f}")
    _maybe_report(args, "fit", results)
    return 0


def _cmd_sweep(args) -> int:
    a, _ = read_points_csv(args.a)
    b = a
    if args.b:
        b, _ = read_points_csv(args.b)
    cfg = _nw_config(args, k=args.kmin)
    report = nw_sweep(
        a, b, args.kmin, args.kmax, cfg,
        small_threshold=args.small_threshold,
        gap_threshold=args.gap_threshold,
        support_budget=args.budget,
    )
    lines = ["k,nw,first_diff"]
    for k, v, d in zip(report.ks, report.nw_values, report.first_diffs):
        lines.append(f"{k},{format(v, '.17g')},{format(d, '.17g')}")
    _atomic_write_text(args.curve, "\n".join(lines) + "\n")
    flag = " (heuristic)" if report.heuristic_selection else ""
    print(f"selected_k: {report.selected_k}{flag}")
    _maybe_report(args, "sweep", {
        "ks": list(report.ks),
        "nw_values": list(report.nw_values),
        "first_diffs": list(report.first_diffs),
        "selected_k": report.selected_k,
        "small_threshold": report.small_threshold,
        "gap_threshold": report.gap_threshold,
        "heuristic_selection": report.heuristic_selection,
        "monotonicity_violations": list(report.monotonicity_violations),
    })
    return 0


def _cmd_cluster(args) -> int:
    data, truth = read_points_csv(args.data)
    cfg = FitConfig(
        k=args.k,
        exponent=args.p,
        lambda_reg=args.lambda_reg,
        points_per_component=args.points_per_component,
        max_outer_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        restarts=args.restarts,
    )
    res = fit_mixture(data, cfg)
    clusters = assign(data, res.model)
    write_points_csv(args.labels_out, data, clusters.labels)
    print(f"wrote cluster labels to {args.labels_out}")
    results = {"objective": res.objective, "pi": res.model.proportions}
    if truth is not None:
        scores = score(clusters, truth)
        results["scores"] = {
            "purity": scores.purity, "nmi": scores.nmi, "ari": scores.ari,
        }
        print(
            f"purity: {scores.purity:.4f}  nmi: {scores.nmi:.4f}  "
            f"ari: {scores.ari:.4f}"
        )
    _maybe_report(args, "cluster", results)
    return 0


def _cmd_compare(args) -> int:
    a, _ = read_points_csv(args.a)
    b, _ = read_points_csv(args.b)
    verdict = comparative_test(
        a, b, _nw_config(args), low_w=args.low_w, low_ratio=args.low_ratio
    )
    print(
        f"W: {verdict.wasserstein:.6g}  NW: {verdict.nw:.6g}  "
        f"ratio: {verdict.ratio:.6g}"
    )
    print(f"verdict: {verdict.verdict.value}")
    _maybe_report(args, "compare", {
        "wasserstein": verdict.wasserstein,
        "nw": verdict.nw,
        "ratio": verdict.ratio,
        "verdict": verdict.verdict,
        "low_w": verdict.thresholds[0],
        "low_ratio": verdict.thresholds[1],
    })
    return _VERDICT_EXIT[verdict.verdict]


def _cmd_da_demo(args) -> int:
    source, src_labels = read_points_csv(args.source)
    if src_labels is None:
        raise ValueError("source file must carry a label column")
    target, tgt_labels = read_points_csv(args.target)
    classes, masses = split_by_label(source, src_labels)
    report = da_reweight(
        classes, target, exponent=args.p,
        source_class_masses=masses, target_labels=tgt_labels,
    )
    print("estimated_pi:", " ".join(format(v, ".6g") for v in report.estimated_pi.values))
    print("objective:", format(report.objective, ".6g"))
    if not np.isnan(report.cross_mode_mass):
        print(
            f"cross_mode_mass: {report.cross_mode_mass:.6g} "
            f"(baseline {report.baseline_cross_mode_mass:.6g})"
        )
    _maybe_report(args, "da-demo", {
        "estimated_pi": report.estimated_pi,
        "objective": report.objective,
        "cross_mode_mass": report.cross_mode_mass,
        "baseline_cross_mode_mass": report.baseline_cross_mode_mass,
        "source_class_masses": masses,
    })
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="nwot",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"nwot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a named synthetic preset to CSV")
    p.add_argument("--preset", required=True, choices=list(preset_names()))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("wasserstein", help="exact transport cost between two files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--p", type=float, default=1.0, choices=[1.0, 2.0])
    p.add_argument("--plan", help="write the optimal plan as sparse triplets CSV")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_wasserstein)

    p = sub.add_parser("nw", help="normalized Wasserstein between two files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--k", type=int, required=True)
    _add_solver_args(p)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_nw)

    p = sub.add_parser("fit", help="fit a k-component mixture to one file")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda-reg", type=float, default=0.0, dest="lambda_reg")
    _add_solver_args(p)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sweep", help="NW(k) curve and component-count selection")
    p.add_argument("--a", required=True)
    p.add_argument("--b", help="defaults to --a (self-sweep)")
    p.add_argument("--kmin", type=int, required=True)
    p.add_argument("--kmax", type=int, required=True)
    _add_solver_args(p, restarts=3)
    p.add_argument("--small-threshold", type=float, dest="small_threshold")
    p.add_argument("--gap-threshold", type=float, dest="gap_threshold")
    p.add_argument("--budget", type=int, help="total support points across components")
    p.add_argument("--curve", default="nw_vs_k.csv", help="plot-ready curve CSV")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("cluster", help="fit a mixture and assign points to components")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda-reg", type=float, default=0.05, dest="lambda_reg")
    _add_solver_args(p)
    p.add_argument("--labels-out", default="cluster_labels.csv", dest="labels_out")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser(
        "compare",
        help="verdict on how two datasets differ "
             "(exit 10 same, 11 proportions differ, 12 components differ)",
    )
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--k", type=int, required=True)
    _add_solver_args(p)
    p.add_argument("--low-w", type=float, dest="low_w",
                   help="W threshold for 'same' (default 5%% of data diameter)")
    p.add_argument("--low-ratio", type=float, default=0.2, dest="low_ratio")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("da-demo", help="class reweighting of a labeled source onto a target")
    p.add_argument("--source", required=True, help="labeled points CSV")
    p.add_argument("--target", required=True)
    p.add_argument("--p", type=float, default=1.0, choices=[1.0, 2.0])
    p.add_argument("--report")
    p.set_defaults(func=_cmd_da_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
