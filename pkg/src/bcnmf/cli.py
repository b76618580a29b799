"""Command-line front end.

Every run records its full flag set in ``manifest.json`` inside its output
directory; ``bcnmf rerun <manifest> --out DIR`` replays it.  Failures print
one line ``ERROR <code>: <message>`` to stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .baselines import cpca_fit, nmf_fit
from .core import BcnmfError, LikelihoodSpec, TrainConfig
from .evaluation import bootstrap_ari, kmeans, ari, topic_associations, SingleClass
from .simulate import make_composite, make_planted
from .trainer import fit, select_alpha

DEFAULT_THETA = 10.0
DEFAULT_PI = 0.1
PATH_ARGS = ("target", "background", "labels", "model_dir")


class UsageError(BcnmfError, ValueError):
    code = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# shared flag groups


def _add_likelihood(p, choices=("gaussian", "poisson", "nb", "zinb")):
    p.add_argument("--likelihood", choices=choices, default="gaussian")
    p.add_argument("--theta", type=float, default=None,
                   help=f"NB/ZINB dispersion (conventional default {DEFAULT_THETA:g})")
    p.add_argument("--pi", type=float, default=None,
                   help=f"ZINB dropout probability (conventional default {DEFAULT_PI:g})")


def _add_training(p):
    p.add_argument("--target", required=True)
    p.add_argument("--background")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)


def _likelihood(args) -> LikelihoodSpec:
    kind = args.likelihood
    if kind == "nb":
        return LikelihoodSpec.nb(DEFAULT_THETA if args.theta is None else args.theta)
    if kind == "zinb":
        return LikelihoodSpec.zinb(DEFAULT_THETA if args.theta is None else args.theta,
                                   DEFAULT_PI if args.pi is None else args.pi)
    return LikelihoodSpec(kind)


def _config(args, alpha=None) -> TrainConfig:
    return TrainConfig(rank=args.k, alpha=args.alpha if alpha is None else alpha, tol=args.tol,
                       max_iter=args.max_iter, batch_size=args.batch_size, seed=args.seed)


def _existing(path, flag):
    if path is None:
        raise UsageError(f"{flag} is required")
    if not Path(path).is_file():
        raise io.IoError(f"{flag}: no such file {path}")
    return path


def _run_record(args) -> dict:
    recorded = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "handler")}
    return {"command": args.command, "args": recorded}


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError("--out is required")
    return Path(args.out)


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    out = _out_dir(args)
    if args.kind == "composite":
        X, Y, labels = make_composite(args.n_target, args.n_background, args.side, args.n_classes,
                                      args.bg_scale, args.seed)
        extra = {}
    else:
        lik = _likelihood(args)
        sim = make_planted(args.m, args.k, args.n_target, args.n_background, args.k_shared,
                           args.noise, lik, args.seed, args.scale)
        X, Y, labels = sim.X, sim.Y, sim.labels
        extra = {"true_W.csv": sim.true_W, "true_HX.csv": sim.true_HX, "true_HY.csv": sim.true_HY}
    io.write_matrix(out / "X.csv", X)
    io.write_matrix(out / "Y.csv", Y)
    io.write_labels(out / "labels.csv", labels)
    for name, A in extra.items():
        io.write_matrix(out / name, A)
    record = _run_record(args)
    record["outputs"] = ["X.csv", "Y.csv", "labels.csv", *extra]
    io.write_json(out / io.MANIFEST, record)
    print(f"simulate: X {X.shape[0]}x{X.shape[1]}, Y {Y.shape[0]}x{Y.shape[1]} -> {out}")


def _load_pair(args, need_background=True):
    X = io.read_matrix(_existing(args.target, "--target"))
    Y = None
    if need_background or args.background is not None:
        Y = io.read_matrix(_existing(args.background, "--background"))
    return X, Y


def cmd_fit(args):
    lik = _likelihood(args)
    config = _config(args)
    out = _out_dir(args)
    X, Y = _load_pair(args)
    model, report = fit(X, Y, lik, config)
    io.write_model(model, report, out, lik, config, extra=_run_record(args))
    print(f"fit: {report.termination.value} after {report.iterations_run} iterations, "
          f"J = {report.objective_trace[-1]:.10g} ({report.wall_time:.2f} s) -> {out}")


CANDIDATE_HEADER = ["alpha", "stage", "health", "termination", "iterations", "objective",
                    "target_loss", "background_loss", "window_change", "stable", "selected"]


def cmd_select_alpha(args):
    lik = _likelihood(args)
    config = _config(args, alpha=0.0)
    X, Y = _load_pair(args)
    sel = select_alpha(X, Y, lik, config, args.alpha_min, args.alpha_max)
    rows = [[c.alpha, c.stage, c.health.value, c.termination.value, c.iterations, c.objective,
             c.target_loss, c.background_loss, c.window_change, int(c.stable), int(c.alpha == sel.alpha)]
            for c in sel.candidates]
    if args.out is None:
        io.write_table_stream(sys.stdout, CANDIDATE_HEADER, rows)
    else:
        out = Path(args.out)
        io.write_table(out / "candidates.csv", CANDIDATE_HEADER, rows)
        record = _run_record(args)
        record.update(selected_alpha=sel.alpha, baseline_target_loss=sel.baseline_target_loss)
        io.write_json(out / io.MANIFEST, record)
    print(f"select-alpha: alpha = {sel.alpha:.10g}", file=sys.stderr if args.out is None else sys.stdout)


def cmd_baseline(args):
    out = _out_dir(args)
    method = args.method
    alpha = 0.0 if method == "pca" else args.alpha
    if method == "nmf":
        lik = _likelihood(args)
        config = _config(args, alpha=0.0)
        X, _ = _load_pair(args, need_background=False)
        W, H, report = nmf_fit(X, args.k, lik, config)
        io.write_matrix(out / "W.csv", W)
        io.write_matrix(out / "HX.csv", H)
        record = _run_record(args)
        record.update(iterations=report.iterations_run, termination=report.termination.value,
                      objective_trace=[float(v) for v in report.objective_trace])
        summary = f"{report.termination.value} after {report.iterations_run} iterations"
    else:
        X, Y = _load_pair(args, need_background=bool(alpha))
        res = cpca_fit(X, Y, args.k, alpha)
        io.write_matrix(out / "P.csv", res.projection)
        io.write_matrix(out / "HX.csv", res.coordinates)
        io.write_matrix(out / "eigenvalues.csv", res.eigenvalues[:, None])
        record = _run_record(args)
        summary = f"top eigenvalue {res.eigenvalues[0]:.10g}"
    io.write_json(out / io.MANIFEST, record)
    print(f"baseline {method}: {summary} -> {out}")


def cmd_evaluate(args):
    labels = io.read_labels(_existing(args.labels, "--labels"))
    n_clusters = args.n_clusters or int(np.unique(labels).size)
    summary, assoc = [], []
    for d in args.model_dir:
        H = io.read_matrix(_existing(str(Path(d) / "HX.csv"), "--model-dir"), allow_negative=True)
        if H.shape[1] != labels.size:
            raise io.ManifestMismatch(f"{d}: HX has {H.shape[1]} samples, labels has {labels.size}")
        km = kmeans(H.T, n_clusters, seed=args.seed, restarts=args.restarts)
        row = [d, ari(km.labels, labels), km.wcss]
        if args.resamples:
            mean, se, _ = bootstrap_ari(H.T, labels, n_clusters, args.resamples, args.resample_size,
                                        args.seed, args.restarts)
            row += [mean, se]
        summary.append(row)
        try:
            table = topic_associations(H, labels)
        except SingleClass:
            continue
        for r in table.ranked:
            assoc.append([d, r.topic, r.t, r.p, r.signed_logp, "ranked"])
        for topic, reason in sorted(table.excluded.items()):
            assoc.append([d, topic, "", "", "", reason])
    header = ["model", "ari", "wcss"] + (["ari_mean", "ari_se"] if args.resamples else [])
    assoc_header = ["model", "topic", "t", "p", "signed_logp", "status"]
    if args.out is None:
        io.write_table_stream(sys.stdout, header, summary)
        if assoc:
            io.write_table_stream(sys.stdout, assoc_header, assoc)
        return
    out = Path(args.out)
    io.write_table(out / "summary.csv", header, summary)
    io.write_table(out / "associations.csv", assoc_header, assoc)
    record = _run_record(args)
    record["outputs"] = ["summary.csv", "associations.csv"]
    io.write_json(out / io.MANIFEST, record)
    for row in summary:
        extra = f", bootstrap {row[3]:.4f} +/- {row[4]:.4f}" if args.resamples else ""
        print(f"evaluate {row[0]}: ARI {row[1]:.4f}{extra}")


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",") if s]
    methods = [m for m in args.methods.split(",") if m]
    unknown = set(methods) - {"bcnmf", "nmf", "cpca"}
    if unknown or not sizes or min(sizes) < 2:
        raise UsageError(f"bad --sizes/--methods: {args.sizes!r}, {args.methods!r}")
    lik = LikelihoodSpec.gaussian()
    config = TrainConfig(rank=args.k, alpha=args.alpha, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    rows = []
    for n in sizes:
        sim = make_planted(args.m, args.k + 1, n, n, 1, noise=0.1, seed=args.seed)
        for method in methods:
            start = time.perf_counter()
            if method == "bcnmf":
                _, report = fit(sim.X, sim.Y, lik, config)
                iters = report.iterations_run
            elif method == "nmf":
                _, _, report = nmf_fit(sim.X, args.k, lik, config)
                iters = report.iterations_run
            else:
                cpca_fit(sim.X, sim.Y, args.k, args.alpha)
                iters = 0
            rows.append([method, n, iters, time.perf_counter() - start])
    header = ["method", "n_samples", "iterations", "seconds"]
    if args.out is None:
        io.write_table_stream(sys.stdout, header, rows)
    else:
        io.write_table(Path(args.out), header, rows)
        print(f"bench: {len(rows)} timings -> {args.out}")


def cmd_rerun(args):
    record = io.read_json(_existing(args.manifest, "manifest"))
    try:
        command, recorded = record["command"], dict(record["args"])
        handler = HANDLERS[command]
    except (KeyError, TypeError):
        raise io.ManifestMismatch(f"{args.manifest} is not a replayable run manifest") from None
    recorded.update(command=command, out=args.out)
    handler(argparse.Namespace(**recorded))


HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select-alpha": cmd_select_alpha,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
}


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bcnmf", description="Background-contrastive NMF toolkit.")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("simulate", help="generate synthetic target/background data")
    p.add_argument("--kind", choices=("composite", "planted"), default="composite")
    p.add_argument("--n-target", type=int, default=600)
    p.add_argument("--n-background", type=int, default=400)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--n-classes", type=int, default=2)
    p.add_argument("--bg-scale", type=float, default=0.8)
    p.add_argument("--m", type=int, default=50, help="planted: number of features")
    p.add_argument("--k", type=int, default=4, help="planted: number of topics")
    p.add_argument("--k-shared", type=int, default=2, help="planted: topics shared with the background")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    _add_likelihood(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = subs.add_parser("fit", help="fit a contrastive factorization")
    _add_training(p)
    p.add_argument("--alpha", type=float, default=0.0)
    _add_likelihood(p)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_fit)

    p = subs.add_parser("select-alpha", help="coarse-to-fine search for alpha")
    _add_training(p)
    p.add_argument("--alpha-min", type=float, default=0.5)
    p.add_argument("--alpha-max", type=float, default=5.0)
    _add_likelihood(p)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_select_alpha)

    p = subs.add_parser("baseline", help="standard NMF, contrastive PCA or PCA")
    p.add_argument("--method", choices=("nmf", "cpca", "pca"), required=True)
    _add_training(p)
    p.add_argument("--alpha", type=float, default=1.0, help="cPCA contrast weight")
    _add_likelihood(p, choices=("gaussian", "poisson"))
    p.add_argument("--out")
    p.set_defaults(handler=cmd_baseline)

    p = subs.add_parser("evaluate", help="k-means ARI and topic association tests")
    p.add_argument("--model-dir", action="append", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--n-clusters", type=int, default=0, help="default: number of distinct labels")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--resamples", type=int, default=0)
    p.add_argument("--resample-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_evaluate)

    p = subs.add_parser("bench", help="wall-clock timings over sample counts")
    p.add_argument("--sizes", default="1000,2000,5000")
    p.add_argument("--methods", default="bcnmf,nmf,cpca")
    p.add_argument("--m", type=int, default=784)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.set_defaults(handler=cmd_bench)

    p = subs.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_rerun)
    return parser


def _absolute_inputs(args):
    for name in PATH_ARGS:
        value = getattr(args, name, None)
        if isinstance(value, list):
            setattr(args, name, [str(Path(v).resolve()) for v in value])
        elif isinstance(value, str):
            setattr(args, name, str(Path(value).resolve()))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _absolute_inputs(args)
        args.handler(args)
    except BcnmfError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ERROR IoError: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
