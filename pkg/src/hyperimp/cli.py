"""Command-line interface.

Subcommands map one-to-one onto the pipeline studies plus prior building,
sampling, and single-optimizer runs.  Exit codes: 0 success, 1 validation
error, 2 I/O error.
"""

import argparse
import csv
import os
import sys

from .configspace import BUILTIN_SPACES, builtin_space, load_space
from .errors import HyperimpError, OutOfDomain
from .forest import ForestSettings, fit
from .optimize import (
    HyperbandSettings,
    SurrogateObjective,
    hyperband,
    prior_sampler,
    random_search,
    uniform_sampler,
    write_trajectory_csv,
)
from .pipeline import (
    emit_reports,
    run_importance_study,
    run_prior_comparison,
    run_verification_study,
    surrogate_objective_factory,
)
from .priors import build_prior, load_prior, sample_prior, save_prior
from .rundata import filter_datasets, load_runs
from .synthetic import synthetic_objective

import numpy as np


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _load_space_arg(arg):
    if arg in BUILTIN_SPACES:
        return builtin_space(arg)
    return load_space(arg)


def _make_objective(spec_str, space, args):
    kind, _, rest = spec_str.partition(":")
    if kind == "synthetic":
        return {
            rest: synthetic_objective(
                rest, space, fidelity_bias=args.fidelity_bias, noise_scale=args.noise_scale
            )
        }
    if kind == "surrogate":
        rc = load_runs(rest, space)
        out = {}
        for idx, d in enumerate(rc.ids):
            forest = fit(rc[d], space, ForestSettings(seed=args.seed), threads=args.threads)
            out[d] = SurrogateObjective(
                forest, fidelity_bias=args.fidelity_bias, noise_scale=args.noise_scale
            )
        return out
    raise OutOfDomain(
        f"objective must be synthetic:NAME or surrogate:RUNS, got {spec_str!r}"
    )


def _cmd_importance(args):
    space = _load_space_arg(args.space)
    rc = load_runs(args.runs, space)
    rc, report = filter_datasets(rc, min_runs=args.min_runs)
    settings = ForestSettings(n_trees=args.trees, seed=args.seed)
    study = run_importance_study(
        rc, space, settings, max_order=args.max_order, threads=args.threads
    )
    os.makedirs(args.out, exist_ok=True)
    for path in emit_reports(study, args.out, args.format):
        print(path)
    for d, reason in report.removed:
        print(f"filtered out {d}: {reason}", file=sys.stderr)
    return 0


def _cmd_verify(args):
    space = _load_space_arg(args.space)
    objectives = _make_objective(args.objective, space, args)
    seeds = tuple(range(args.seed, args.seed + args.seeds))
    study = run_verification_study(
        objectives, space, k=args.k, n_iters=args.iters, seeds=seeds, threads=args.threads
    )
    os.makedirs(args.out, exist_ok=True)
    for path in emit_reports(study, args.out, args.format):
        print(path)
    return 0


def _cmd_priors_build(args):
    space = _load_space_arg(args.space)
    rc = load_runs(args.runs, space)
    if args.min_runs > 1:
        rc, _ = filter_datasets(rc, min_runs=args.min_runs)
    model = build_prior(rc, space, n=args.n, exclude=args.exclude)
    save_prior(model, space, args.out)
    print(args.out)
    return 0


def _cmd_priors_sample(args):
    space = _load_space_arg(args.space)
    model = load_prior(args.prior, space)
    rng = np.random.default_rng(args.seed)
    rows = [sample_prior(model, space, rng) for _ in range(args.count)]
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", *space.names])
        for cfg in rows:
            writer.writerow(["sampled", *[_fmt(cfg[n]) for n in space.names]])
    finally:
        if args.out:
            fh.close()
    return 0


def _cmd_compare(args):
    space = _load_space_arg(args.space)
    rc = load_runs(args.runs, space)
    if args.min_runs > 1:
        rc, _ = filter_datasets(rc, min_runs=args.min_runs)
    hb = HyperbandSettings(s_max=args.smax, eta=args.eta, R=args.R, seed=args.seed)
    study = run_prior_comparison(
        rc,
        space,
        hb_settings=hb,
        seeds=args.seeds,
        prior_n=args.n,
        threads=args.threads,
    )
    os.makedirs(args.out, exist_ok=True)
    for path in emit_reports(study, args.out, args.format):
        print(path)
    return 0


def _cmd_optimize(args):
    space = _load_space_arg(args.space)
    objectives = _make_objective(args.objective, space, args)
    if args.dataset is not None:
        if args.dataset not in objectives:
            raise OutOfDomain(
                f"dataset {args.dataset!r} not in objective set {sorted(objectives)}"
            )
        obj = objectives[args.dataset]
    elif len(objectives) == 1:
        obj = next(iter(objectives.values()))
    else:
        raise OutOfDomain(
            f"runs file holds {len(objectives)} datasets; pick one with --dataset"
        )
    if args.sampler == "prior":
        if not args.prior:
            raise OutOfDomain("--sampler prior needs --prior FILE")
        sampler = prior_sampler(load_prior(args.prior, space), space)
    else:
        sampler = uniform_sampler(space)
    if args.optimizer == "random":
        result = random_search(obj, space, sampler, args.iters, seed=args.seed)
    else:
        settings = HyperbandSettings(s_max=args.smax, eta=args.eta, R=args.R, seed=args.seed)
        result = hyperband(obj, space, sampler, settings)
    write_trajectory_csv(result, space, args.out)
    print(args.out)
    print(f"best_score {result.best_score!r}", file=sys.stderr)
    return 0


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0, help="base random seed")
    sub.add_argument("--format", choices=("json", "csv", "both"), default="both")
    sub.add_argument("--threads", type=int, default=1)


def _add_fidelity(sub):
    sub.add_argument("--fidelity-bias", type=float, default=0.0)
    sub.add_argument("--noise-scale", type=float, default=0.0)


def build_parser():
    parser = _Parser(prog="hyperimp", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("importance", help="per-dataset variance decomposition study")
    p.add_argument("--runs", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--trees", type=int, default=16)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--min-runs", type=int, default=150)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_importance)

    p = subs.add_parser("verify", help="fix-one-hyperparameter random-search study")
    p.add_argument("--space", required=True)
    p.add_argument("--objective", required=True, help="synthetic:NAME or surrogate:RUNS")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seeds", type=int, default=1, help="number of seeds (seed..seed+n-1)")
    p.add_argument("--out", required=True)
    _add_fidelity(p)
    _add_common(p)
    p.set_defaults(func=_cmd_verify)

    p = subs.add_parser("priors", help="build or sample prior models")
    priors_subs = p.add_subparsers(dest="priors_command", required=True)
    pb = priors_subs.add_parser("build")
    pb.add_argument("--runs", required=True)
    pb.add_argument("--space", required=True)
    pb.add_argument("--n", type=int, default=10)
    pb.add_argument("--exclude", default=None)
    pb.add_argument("--min-runs", type=int, default=1)
    pb.add_argument("--out", required=True)
    _add_common(pb)
    pb.set_defaults(func=_cmd_priors_build)
    ps = priors_subs.add_parser("sample")
    ps.add_argument("--prior", required=True)
    ps.add_argument("--space", required=True)
    ps.add_argument("--count", type=int, required=True)
    ps.add_argument("--out", default=None)
    _add_common(ps)
    ps.set_defaults(func=_cmd_priors_sample)

    p = subs.add_parser("compare", help="leave-one-out uniform vs prior Hyperband")
    p.add_argument("--runs", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--smax", type=int, default=4)
    p.add_argument("--eta", type=float, default=2.0)
    p.add_argument("--R", type=float, default=16.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--min-runs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_compare)

    p = subs.add_parser("optimize", help="run one optimizer, export its trajectory")
    p.add_argument("--space", required=True)
    p.add_argument("--objective", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--optimizer", choices=("random", "hyperband"), default="hyperband")
    p.add_argument("--sampler", choices=("uniform", "prior"), default="uniform")
    p.add_argument("--prior", default=None)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--smax", type=int, default=4)
    p.add_argument("--eta", type=float, default=2.0)
    p.add_argument("--R", type=float, default=16.0)
    p.add_argument("--out", required=True)
    _add_fidelity(p)
    _add_common(p)
    p.set_defaults(func=_cmd_optimize)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except HyperimpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
