"""Per-hyperparameter sampling priors learned from top configurations.

Continuous (and integer) dimensions get a Gaussian kernel density estimate
over internal-space values, truncated to [0, 1] and renormalized per kernel;
categorical dimensions get Laplace-smoothed frequencies.  Each dataset
contributes exactly its top-n configurations, so datasets with more runs do
not dominate the pool.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .configspace import CATEGORICAL
from .errors import EmptyCollection, InvalidSpec, OutOfDomain
from .rundata import top_n_configs

BANDWIDTH_FLOOR = 1e-3
RESAMPLE_CAP = 100


def silverman_bandwidth(values):
    """Rule-of-thumb bandwidth 1.06 * std * m^(-1/5), floored at 1e-3."""
    values = np.asarray(values, dtype=np.float64)
    m = len(values)
    sd = float(np.std(values, ddof=1)) if m > 1 else 0.0
    return max(BANDWIDTH_FLOOR, 1.06 * sd * m ** (-0.2))


@dataclass(frozen=True)
class ContinuousPrior:
    """Truncated-renormalized Gaussian mixture over internal [0, 1]."""

    support: np.ndarray
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(
            self, "support", np.asarray(self.support, dtype=np.float64)
        )
        if len(self.support) < 1:
            raise InvalidSpec("a continuous prior needs at least one support point")
        if self.bandwidth < BANDWIDTH_FLOOR:
            raise InvalidSpec(f"bandwidth {self.bandwidth} below floor {BANDWIDTH_FLOOR}")

    def pdf(self, u):
        """Density at internal value(s) u; integrates to 1 over [0, 1]."""
        u = np.asarray(u, dtype=np.float64)
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise OutOfDomain("internal value outside [0, 1]")
        h = self.bandwidth
        x = (np.atleast_1d(u)[:, None] - self.support[None, :]) / h
        kernels = np.exp(-0.5 * x * x) / (h * math.sqrt(2.0 * math.pi))
        # per-kernel truncation mass on [0, 1]
        mass = ndtr((1.0 - self.support) / h) - ndtr(-self.support / h)
        dens = np.mean(kernels / mass[None, :], axis=1)
        return float(dens[0]) if np.isscalar(u) or u.ndim == 0 else dens

    def sample(self, rng):
        """Pick a support point, jitter, reject outside [0, 1] (capped)."""
        i = int(rng.integers(len(self.support)))
        center = float(self.support[i])
        for _ in range(RESAMPLE_CAP):
            x = center + self.bandwidth * float(rng.standard_normal())
            if 0.0 <= x <= 1.0:
                return x
        return min(max(x, 0.0), 1.0)


@dataclass(frozen=True)
class CategoricalPrior:
    """Laplace-smoothed category frequencies."""

    counts: tuple
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidSpec("alpha must be >= 0")
        counts = tuple(int(c) for c in self.counts)
        if not counts or any(c < 0 for c in counts):
            raise InvalidSpec("counts must be non-negative")
        total = sum(counts) + self.alpha * len(counts)
        if total <= 0:
            raise InvalidSpec("all-zero counts need alpha > 0")
        object.__setattr__(self, "counts", counts)

    @property
    def probabilities(self):
        counts = np.array(self.counts, dtype=np.float64)
        return (counts + self.alpha) / (counts.sum() + self.alpha * len(counts))

    def pdf(self, index):
        i = int(index)
        if i != index or not 0 <= i < len(self.counts):
            raise OutOfDomain(f"invalid category index {index!r}")
        return float(self.probabilities[i])

    def sample(self, rng):
        return int(rng.choice(len(self.counts), p=self.probabilities))


@dataclass(frozen=True)
class PriorModel:
    """One prior per hyperparameter, plus the dataset ids it was built from."""

    priors: dict
    provenance: tuple
    warnings: tuple = ()

    def __post_init__(self):
        if not self.provenance:
            raise EmptyCollection("a prior model needs at least one source dataset")


def build_prior(rc, space, n=10, exclude=None):
    """Fit per-dimension priors to the pooled top-n configs of each dataset."""
    ids = [d for d in rc.ids if d != exclude]
    if not ids:
        raise EmptyCollection("no datasets left to build a prior from")
    warnings = ()
    if len(ids) == 1:
        warnings = (f"single dataset: prior built from {ids[0]!r} only",)

    pooled = []
    for d in ids:
        pooled.extend(top_n_configs(rc[d], n))

    priors = {}
    for spec in space.specs:
        internal = [spec.to_internal(cfg[spec.name]) for cfg in pooled]
        if spec.kind == CATEGORICAL:
            counts = np.bincount(internal, minlength=len(spec.categories))
            priors[spec.name] = CategoricalPrior(tuple(int(c) for c in counts), alpha=1.0)
        else:
            values = np.array(internal, dtype=np.float64)
            priors[spec.name] = ContinuousPrior(values, silverman_bandwidth(values))
    return PriorModel(priors, tuple(ids), warnings)


def pdf(model, spec, v):
    """Density (continuous) or mass (categorical) at an internal value."""
    prior = model.priors[spec.name]
    return prior.pdf(v)


def sample_prior(model, space, rng):
    """Draw one configuration from the prior, mapped to external units."""
    return {
        spec.name: spec.from_internal(model.priors[spec.name].sample(rng))
        for spec in space.specs
    }


def save_prior(model, space, path):
    """Serialize a prior model as JSON."""
    dims = {}
    for spec in space.specs:
        prior = model.priors[spec.name]
        if isinstance(prior, CategoricalPrior):
            probs = prior.probabilities
            dims[spec.name] = {
                "type": "categorical",
                "probs": {cat: float(p) for cat, p in zip(spec.categories, probs)},
                "counts": list(prior.counts),
                "alpha": prior.alpha,
            }
        else:
            dims[spec.name] = {
                "type": "kde",
                "support": [float(x) for x in prior.support],
                "bandwidth": float(prior.bandwidth),
            }
    payload = {
        "priors": dims,
        "provenance": list(model.provenance),
        "warnings": list(model.warnings),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_prior(path, space):
    """Load a prior model saved by :func:`save_prior`."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    priors = {}
    for spec in space.specs:
        if spec.name not in payload.get("priors", {}):
            raise InvalidSpec(f"prior file missing hyperparameter {spec.name!r}")
        entry = payload["priors"][spec.name]
        if entry["type"] == "categorical":
            priors[spec.name] = CategoricalPrior(
                tuple(entry["counts"]), alpha=entry["alpha"]
            )
        elif entry["type"] == "kde":
            priors[spec.name] = ContinuousPrior(
                np.array(entry["support"], dtype=np.float64), entry["bandwidth"]
            )
        else:
            raise InvalidSpec(f"unknown prior type {entry['type']!r}")
    return PriorModel(
        priors, tuple(payload["provenance"]), tuple(payload.get("warnings", ()))
    )
