"""End-to-end studies: cross-dataset importance, fixed-hyperparameter
verification, and leave-one-dataset-out prior comparison.

Studies are plain data; :func:`emit_reports` writes them out as JSON reports
plus CSV plot data.  All loops run in canonical (sorted dataset id) order and
derive per-task seeds deterministically, so outputs are byte-identical across
reruns and thread counts.
"""

import csv
import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from . import fanova
from ._util import parallel_map
from .errors import ConstantModel, ConstantTarget, EmptyCollection, TooFewSamples
from .forest import ForestSettings, fit
from .optimize import (
    HyperbandSettings,
    SurrogateObjective,
    hyperband,
    prior_sampler,
    uniform_sampler,
    verify_importance,
)
from .priors import build_prior
from .stats import ScoreMatrix, nemenyi_test, rank_report_to_dict, write_ranks_csv

SURROGATE_FIDELITY_BIAS = 0.05
SURROGATE_NOISE_SCALE = 0.02


def _derive_seed(base, index):
    return int(np.random.SeedSequence(entropy=(base, index)).generate_state(1)[0])


@dataclass(frozen=True)
class ImportanceStudy:
    space: object
    max_order: int
    dataset_ids: tuple
    skipped: tuple
    fractions: dict            # dataset_id -> {subset tuple -> raw fraction}
    v_total_mean: dict         # dataset_id -> mean total variance over trees
    mean_fractions: dict       # subset tuple -> mean fraction across datasets
    top_interactions: tuple
    rank_report: object        # RankReport over singleton fractions, or None


def run_importance_study(rc, space, settings=ForestSettings(), max_order=2, threads=1):
    """Fit a surrogate forest per dataset and decompose its variance.

    Datasets whose forest is entirely degenerate are skipped (recorded with
    a reason), mirroring the removal of constant-performance datasets.
    """
    ids = rc.ids

    def analyze(item):
        idx, d = item
        per_dataset = replace(settings, seed=_derive_seed(settings.seed, idx))
        try:
            forest = fit(rc[d], space, per_dataset)
            vd = fanova.importance(forest, max_order=max_order)
        except (ConstantTarget, TooFewSamples, ConstantModel) as e:
            return d, None, str(e)
        totals = [t.total_variance for t in vd.per_tree if t is not None]
        return d, (vd.fractions, float(np.mean(totals))), None

    results = parallel_map(analyze, list(enumerate(ids)), threads)
    fractions, v_totals, skipped = {}, {}, []
    for d, payload, reason in results:
        if payload is None:
            skipped.append((d, reason))
        else:
            fractions[d], v_totals[d] = payload
    if not fractions:
        raise EmptyCollection("no dataset produced a non-degenerate decomposition")

    kept = sorted(fractions)
    subsets = sorted(next(iter(fractions.values())), key=lambda u: (len(u), u))
    mean_fractions = {
        u: float(np.mean([fractions[d][u] for d in kept])) for u in subsets
    }
    interactions = [(u, f) for u, f in mean_fractions.items() if len(u) >= 2]
    interactions.sort(key=lambda item: (-item[1], item[0]))

    rank_report = None
    if len(space) >= 2:
        singles = [(d,) for d in range(len(space))]
        scores = np.array([[fractions[d][u] for u in singles] for d in kept])
        rank_report = nemenyi_test(ScoreMatrix(space.names, tuple(kept), scores))

    return ImportanceStudy(
        space=space,
        max_order=max_order,
        dataset_ids=tuple(kept),
        skipped=tuple(skipped),
        fractions=fractions,
        v_total_mean=v_totals,
        mean_fractions=mean_fractions,
        top_interactions=tuple(interactions[:3]),
        rank_report=rank_report,
    )


@dataclass(frozen=True)
class VerificationRow:
    """verify_importance results for every dimension, one objective+seed."""

    objective: str
    seed: int
    reports: tuple  # FixedDimReport per dim, in space order

    @property
    def y_star(self):
        return np.array([r.mean_best for r in self.reports])


@dataclass(frozen=True)
class VerificationStudy:
    space: object
    seeds: tuple
    rows: tuple
    avg_rank_curves: np.ndarray  # iterations x dims
    rank_report: object


def run_verification_study(objectives, space, k=10, n_iters=100, seeds=(0,), threads=1):
    """Pin each hyperparameter in turn and compare optimized scores.

    ``objectives`` maps name -> objective.  For every (objective, seed) pair
    and every dimension the fix-one-dimension search runs; the resulting
    y* values are ranked across dimensions (rank 1 = best score when left
    unoptimized = least important).
    """
    names = sorted(objectives)
    tasks = [(oname, seed) for oname in names for seed in seeds]

    def one(task):
        oname, seed = task
        obj = objectives[oname]
        reports = tuple(
            verify_importance(obj, space, j, k=k, n_iters=n_iters, seed=seed)
            for j in range(len(space))
        )
        return VerificationRow(oname, seed, reports)

    rows = tuple(parallel_map(one, tasks, threads))

    # incumbent curve per dim = mean over pinned values; ranked per iteration
    curves = np.array(
        [
            [np.mean([run.incumbent for run in rep.runs], axis=0) for rep in row.reports]
            for row in rows
        ]
    )  # rows x dims x iters
    rank_curves = np.empty((n_iters, len(space)))
    for t in range(n_iters):
        at_t = rankdata(-curves[:, :, t], method="average", axis=1)
        rank_curves[t] = at_t.mean(axis=0)

    rank_report = None
    if len(space) >= 2:
        scores = np.stack([row.y_star for row in rows])
        labels = tuple(f"{row.objective}@{row.seed}" for row in rows)
        rank_report = nemenyi_test(ScoreMatrix(space.names, labels, scores))

    return VerificationStudy(
        space=space,
        seeds=tuple(seeds),
        rows=rows,
        avg_rank_curves=rank_curves,
        rank_report=rank_report,
    )


@dataclass(frozen=True)
class PriorComparisonStudy:
    space: object
    dataset_ids: tuple
    uniform_scores: np.ndarray  # per dataset, mean best over seeds
    prior_scores: np.ndarray
    deltas: np.ndarray          # prior - uniform
    seeds: int
    hb_settings: object
    rank_report: object
    provenances: dict           # dataset_id -> prior provenance


def surrogate_objective_factory(
    space,
    settings=ForestSettings(),
    fidelity_bias=SURROGATE_FIDELITY_BIAS,
    noise_scale=SURROGATE_NOISE_SCALE,
):
    """Default objective for prior comparison: replay a per-dataset forest."""

    def make(index, runs):
        per_dataset = replace(settings, seed=_derive_seed(settings.seed, index))
        forest = fit(runs, space, per_dataset)
        return SurrogateObjective(
            forest, fidelity_bias=fidelity_bias, noise_scale=noise_scale
        )

    return make


def run_prior_comparison(
    rc,
    space,
    objective_factory=None,
    hb_settings=HyperbandSettings(),
    seeds=10,
    prior_n=10,
    threads=1,
):
    """Leave-one-dataset-out Hyperband comparison: uniform vs prior sampling.

    For each dataset the prior is built from all other datasets, then both
    Hyperband variants run with ``seeds`` repetitions (seed base + index)
    and their best scores are averaged.
    """
    if len(rc) < 2:
        raise EmptyCollection("prior comparison needs at least 2 datasets")
    if objective_factory is None:
        objective_factory = surrogate_objective_factory(space)
    ids = rc.ids

    def one(item):
        idx, d = item
        prior = build_prior(rc, space, n=prior_n, exclude=d)
        if d in prior.provenance:
            raise EmptyCollection(f"leak: dataset {d!r} in its own prior provenance")
        obj = objective_factory(idx, rc[d])
        u_best, p_best = [], []
        for rep in range(seeds):
            st = replace(hb_settings, seed=hb_settings.seed + rep)
            u_best.append(hyperband(obj, space, uniform_sampler(space), st).best_score)
            p_best.append(hyperband(obj, space, prior_sampler(prior, space), st).best_score)
        return d, float(np.mean(u_best)), float(np.mean(p_best)), prior.provenance

    results = parallel_map(one, list(enumerate(ids)), threads)
    uniform = np.array([r[1] for r in results])
    prior = np.array([r[2] for r in results])
    scores = np.column_stack([uniform, prior])
    report = nemenyi_test(ScoreMatrix(("uniform", "priors"), tuple(ids), scores))
    return PriorComparisonStudy(
        space=space,
        dataset_ids=tuple(ids),
        uniform_scores=uniform,
        prior_scores=prior,
        deltas=prior - uniform,
        seeds=seeds,
        hb_settings=hb_settings,
        rank_report=report,
        provenances={r[0]: r[3] for r in results},
    )


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _open_csv(path):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _emit_importance(study, out_dir, fmt):
    paths = []
    subsets = sorted(study.mean_fractions, key=lambda u: (len(u), u))
    if fmt in ("json", "both"):
        per_dataset = []
        for d in study.dataset_ids:
            vd = study.fractions[d]
            per_dataset.append(
                {
                    "dataset_id": d,
                    "fractions": {
                        fanova.subset_key(study.space, u): min(max(vd[u], 0.0), 1.0)
                        for u in subsets
                    },
                    "v_total_mean": study.v_total_mean[d],
                }
            )
        payload = {
            "report": "importance",
            "max_order": study.max_order,
            "datasets": list(study.dataset_ids),
            "skipped": [list(s) for s in study.skipped],
            "per_dataset": per_dataset,
            "mean_fractions": {
                fanova.subset_key(study.space, u): f
                for u, f in study.mean_fractions.items()
            },
            "top_interactions": [
                [fanova.subset_key(study.space, u), f] for u, f in study.top_interactions
            ],
            "rank_report": rank_report_to_dict(study.rank_report)
            if study.rank_report
            else None,
        }
        path = f"{out_dir}/importance_report.json"
        _write_json(path, payload)
        paths.append(path)
    if fmt in ("csv", "both"):
        path = f"{out_dir}/importance_violins.csv"
        fh, writer = _open_csv(path)
        with fh:
            writer.writerow(["dataset_id", "hyperparameter", "fraction"])
            for d in study.dataset_ids:
                for u in subsets:
                    frac = min(max(study.fractions[d][u], 0.0), 1.0)
                    writer.writerow([d, fanova.subset_key(study.space, u), repr(frac)])
        paths.append(path)
        if study.rank_report is not None:
            path = f"{out_dir}/importance_ranks.csv"
            write_ranks_csv(study.rank_report, path)
            paths.append(path)
    return paths


def _emit_verification(study, out_dir, fmt):
    paths = []
    names = study.space.names
    if fmt in ("json", "both"):
        payload = {
            "report": "verification",
            "hyperparameters": list(names),
            "seeds": list(study.seeds),
            "rows": [
                {
                    "objective": row.objective,
                    "seed": row.seed,
                    "y_star": {n: float(v) for n, v in zip(names, row.y_star)},
                }
                for row in study.rows
            ],
            "rank_report": rank_report_to_dict(study.rank_report)
            if study.rank_report
            else None,
        }
        path = f"{out_dir}/verification_report.json"
        _write_json(path, payload)
        paths.append(path)
    if fmt in ("csv", "both"):
        path = f"{out_dir}/verification_rank_curves.csv"
        fh, writer = _open_csv(path)
        with fh:
            writer.writerow(["iteration", "hyperparameter", "avg_rank"])
            for t in range(study.avg_rank_curves.shape[0]):
                for d, n in enumerate(names):
                    writer.writerow([t + 1, n, repr(float(study.avg_rank_curves[t, d]))])
        paths.append(path)
        path = f"{out_dir}/verification_fixed_values.csv"
        fh, writer = _open_csv(path)
        with fh:
            writer.writerow(["objective", "seed", "hyperparameter", "fixed_value", "best_score"])
            for row in study.rows:
                for n, rep in zip(names, row.reports):
                    for run in rep.runs:
                        writer.writerow(
                            [row.objective, row.seed, n, run.value, repr(run.best_score)]
                        )
        paths.append(path)
    return paths


def _emit_prior_comparison(study, out_dir, fmt):
    paths = []
    report = study.rank_report
    if fmt in ("json", "both"):
        payload = {
            "report": "prior_comparison",
            "M": len(study.dataset_ids),
            "methods": list(report.methods),
            "avg_ranks": [float(r) for r in report.avg_ranks],
            "cd": float(report.cd),
            "significant": bool(report.significant_pairs),
            "seeds": study.seeds,
            "per_dataset": [
                {
                    "dataset_id": d,
                    "uniform": float(study.uniform_scores[i]),
                    "priors": float(study.prior_scores[i]),
                    "delta": float(study.deltas[i]),
                }
                for i, d in enumerate(study.dataset_ids)
            ],
            "rank_report": rank_report_to_dict(report),
        }
        path = f"{out_dir}/prior_comparison.json"
        _write_json(path, payload)
        paths.append(path)
    if fmt in ("csv", "both"):
        path = f"{out_dir}/prior_deltas.csv"
        fh, writer = _open_csv(path)
        with fh:
            writer.writerow(["dataset_id", "uniform", "priors", "delta"])
            for i, d in enumerate(study.dataset_ids):
                writer.writerow(
                    [
                        d,
                        repr(float(study.uniform_scores[i])),
                        repr(float(study.prior_scores[i])),
                        repr(float(study.deltas[i])),
                    ]
                )
        paths.append(path)
    return paths


def emit_reports(study, out_dir, fmt="both"):
    """Write a study's JSON report and CSV plot data; returns written paths."""
    if fmt not in ("json", "csv", "both"):
        raise ValueError(f"format must be json, csv or both, got {fmt!r}")
    if isinstance(study, ImportanceStudy):
        return _emit_importance(study, out_dir, fmt)
    if isinstance(study, VerificationStudy):
        return _emit_verification(study, out_dir, fmt)
    if isinstance(study, PriorComparisonStudy):
        return _emit_prior_comparison(study, out_dir, fmt)
    raise TypeError(f"unknown study type {type(study).__name__}")
