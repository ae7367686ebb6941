"""Named synthetic objectives and run-data generators for desk-scale studies.

These stand in for real classifier training: base functions are defined over
the internal unit cube, and dataset families produce RunCollections whose
optima either cluster (so cross-dataset priors help) or scatter uniformly
(so they should not).
"""

import numpy as np

from .configspace import ConfigSpace, HyperparameterSpec, sample_uniform
from .errors import OutOfDomain
from .optimize import SyntheticObjective
from .rundata import DatasetRuns, RunCollection, RunRecord


def unit_space(n_dims):
    """A space of n continuous hyperparameters on [0, 1], named x1..xn."""
    return ConfigSpace(
        tuple(
            HyperparameterSpec(f"x{d + 1}", "continuous", 0.0, 1.0)
            for d in range(n_dims)
        )
    )


def _sphere(u):
    return -float(np.sum((u - 0.5) ** 2))


def _dominant_first(u):
    rest = float(np.sum((u[1:] - 0.5) ** 2))
    return -((u[0] - 0.5) ** 2) - 0.01 * rest


def _product2(u):
    return float(u[0] * u[1])


def _additive2(u):
    return float(u[0] + u[1])


def _graded(u):
    coeffs = 0.3 ** np.arange(len(u))
    return -float(np.dot(coeffs, (u - 0.5) ** 2))


def _constant(u):
    return 0.5


BASE_FUNCTIONS = {
    "sphere": _sphere,
    "dominant_first": _dominant_first,
    "product2": _product2,
    "additive2": _additive2,
    "graded": _graded,
    "constant": _constant,
}


def synthetic_objective(name, space, fidelity_bias=0.0, noise_scale=0.0):
    """Look up a named base function and wrap it as a budgeted objective."""
    if name not in BASE_FUNCTIONS:
        raise OutOfDomain(
            f"unknown synthetic objective {name!r}, expected one of {sorted(BASE_FUNCTIONS)}"
        )
    return SyntheticObjective(
        space, BASE_FUNCTIONS[name], fidelity_bias=fidelity_bias, noise_scale=noise_scale
    )


def _make_runs(space, fns, runs_per_dataset, rng):
    datasets = {}
    for i, fn in enumerate(fns):
        did = f"synth-{i:03d}"
        records = []
        for _ in range(runs_per_dataset):
            config = sample_uniform(space, rng)
            u = space.to_internal_vector(config)
            records.append(RunRecord(did, config, float(fn(u))))
        datasets[did] = DatasetRuns(did, tuple(records))
    return RunCollection(datasets)


def quadratic_bowl(center):
    center = np.asarray(center, dtype=np.float64)

    def fn(u):
        return -float(np.sum((u - center) ** 2))

    return fn


def clustered_optimum_family(
    n_datasets=20, runs_per_dataset=300, n_dims=2, center=0.2, spread=0.03, seed=0
):
    """Datasets whose optima all sit near the same internal point.

    Priors learned on any subset of these datasets concentrate near the
    shared optimum, so prior-guided sampling should beat uniform sampling.
    Returns (RunCollection, {dataset_id: base function}).
    """
    rng = np.random.default_rng(seed)
    centers = np.clip(
        rng.normal(center, spread, size=(n_datasets, n_dims)), 0.02, 0.98
    )
    fns = [quadratic_bowl(c) for c in centers]
    rc = _make_runs(unit_space(n_dims), fns, runs_per_dataset, rng)
    return rc, dict(zip(rc.ids, fns))


def uniform_optimum_family(
    n_datasets=20, runs_per_dataset=300, n_dims=2, seed=0
):
    """Adversarial family: optima scattered uniformly over the space."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.05, 0.95, size=(n_datasets, n_dims))
    fns = [quadratic_bowl(c) for c in centers]
    rc = _make_runs(unit_space(n_dims), fns, runs_per_dataset, rng)
    return rc, dict(zip(rc.ids, fns))


def dominant_dim_family(
    n_datasets=20, runs_per_dataset=300, seed=0, weak_coeff=0.01
):
    """Two-dim datasets where the first dimension always dominates.

    f_d(u) = -a_d (u1 - m_d)^2 - weak_coeff (u2 - 0.5)^2 with a_d in [0.5, 1].
    """
    rng = np.random.default_rng(seed)

    def make(a, m):
        def fn(u):
            return -float(a * (u[0] - m) ** 2 + weak_coeff * (u[1] - 0.5) ** 2)

        return fn

    fns = [
        make(rng.uniform(0.5, 1.0), rng.uniform(0.2, 0.8)) for _ in range(n_datasets)
    ]
    rc = _make_runs(unit_space(2), fns, runs_per_dataset, rng)
    return rc, dict(zip(rc.ids, fns))
