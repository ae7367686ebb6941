"""Random search, successive halving, and Hyperband over budgeted objectives.

An objective is anything with ``evaluate(config, budget, seed) -> float``
(higher is better), pure for fixed arguments, where ``budget`` is a fraction
of the maximum evaluation resources in (0, 1] and ``budget == 1`` is full
fidelity.  Samplers are callables ``sampler(rng) -> Config``; uniform and
prior-based samplers are provided.
"""

import csv
import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .configspace import CATEGORICAL, sample_uniform
from .errors import InvalidSpec, OutOfDomain
from .priors import sample_prior


@dataclass(frozen=True)
class Evaluation:
    """One objective call: which config, at what budget, scoring what."""

    index: int
    bracket: int | None
    round: int | None
    budget: float
    score: float
    config: dict


@dataclass(frozen=True)
class OptResult:
    """Trajectory plus the best config judged at its own highest budget."""

    trajectory: tuple
    best_config: dict
    best_score: float


@dataclass(frozen=True)
class HyperbandSettings:
    s_max: int = 4
    eta: float = 2.0
    R: float = 16.0
    seed: int = 0

    def __post_init__(self):
        if self.s_max < 0:
            raise InvalidSpec("s_max must be >= 0")
        if self.eta <= 1.0:
            raise InvalidSpec("eta must be > 1")
        if self.R <= 0:
            raise InvalidSpec("R must be positive")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")

    @property
    def brackets(self):
        return self.s_max + 1


def _noise_rng(space, config, budget, seed):
    """Deterministic per-(config, budget, seed) generator for fidelity noise."""
    u = space.to_internal_vector(config)
    h = hashlib.blake2b(digest_size=8)
    h.update(u.tobytes())
    h.update(struct.pack("<d", float(budget)))
    h.update(struct.pack("<q", int(seed)))
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


class SyntheticObjective:
    """A test function over internal space with a low-fidelity penalty.

    score = fn(u) - fidelity_bias * (1 - b) + eps,  eps ~ N(0, noise_scale * (1 - b))

    At full budget the score equals ``fn(u)`` exactly.  Noise is seeded from
    (config, budget, seed) so repeated evaluations agree.
    """

    def __init__(self, space, fn, fidelity_bias=0.0, noise_scale=0.0):
        if fidelity_bias < 0 or noise_scale < 0:
            raise InvalidSpec("fidelity_bias and noise_scale must be >= 0")
        self.space = space
        self.fn = fn
        self.fidelity_bias = fidelity_bias
        self.noise_scale = noise_scale

    def _base(self, config):
        return float(self.fn(self.space.to_internal_vector(config)))

    def evaluate(self, config, budget=1.0, seed=0):
        if not 0.0 < budget <= 1.0:
            raise OutOfDomain(f"budget {budget} outside (0, 1]")
        score = self._base(config)
        if budget >= 1.0:
            return score
        score -= self.fidelity_bias * (1.0 - budget)
        if self.noise_scale > 0.0:
            std = self.noise_scale * (1.0 - budget)
            score += std * float(
                _noise_rng(self.space, config, budget, seed).standard_normal()
            )
        return score


class SurrogateObjective(SyntheticObjective):
    """Replays a fitted forest as the base function."""

    def __init__(self, forest, fidelity_bias=0.0, noise_scale=0.0):
        super().__init__(
            forest.space,
            None,
            fidelity_bias=fidelity_bias,
            noise_scale=noise_scale,
        )
        self.forest = forest

    def _base(self, config):
        return self.forest.predict(config)


def uniform_sampler(space):
    """Sampler drawing uniformly in internal space."""

    def sample(rng):
        return sample_uniform(space, rng)

    return sample


def prior_sampler(model, space):
    """Sampler drawing from a fitted prior model."""

    def sample(rng):
        return sample_prior(model, space, rng)

    return sample


def random_search(obj, space, sampler, n_iters, seed=0):
    """n_iters independent full-budget evaluations; best returned."""
    if n_iters < 1:
        raise OutOfDomain("n_iters must be >= 1")
    rng = np.random.default_rng(seed)
    trajectory = []
    best_config, best_score = None, -math.inf
    for i in range(n_iters):
        config = sampler(rng)
        score = obj.evaluate(config, 1.0, seed)
        trajectory.append(Evaluation(i, None, None, 1.0, score, config))
        if score > best_score:
            best_config, best_score = config, score
    return OptResult(tuple(trajectory), best_config, best_score)


def fixed_values(spec, k=10):
    """Values spread uniformly over a hyperparameter's range.

    Categorical dims return every category; numeric dims the externalized
    internal bin midpoints (2i+1)/(2k), with integers deduplicated.
    """
    if spec.kind == CATEGORICAL:
        return list(spec.categories)
    values = [spec.from_internal((2 * i + 1) / (2 * k)) for i in range(k)]
    return list(dict.fromkeys(values))


@dataclass(frozen=True)
class FixedValueRun:
    """Random search with one hyperparameter pinned to ``value``."""

    value: object
    best_score: float
    incumbent: np.ndarray  # best-so-far score after each iteration


@dataclass(frozen=True)
class FixedDimReport:
    """Mean best score over all pinned values of one dimension (y*)."""

    dim: int
    mean_best: float
    runs: tuple


def verify_importance(obj, space, j, k=10, n_iters=100, seed=0):
    """Score obtained when hyperparameter ``j`` is never optimized.

    For each of the ``k`` fixed values, random search optimizes all other
    dimensions with ``j`` pinned; the per-value bests are averaged.  Lower
    results mean the dimension mattered more.
    """
    if not 0 <= j < len(space):
        raise OutOfDomain(f"dim {j} outside 0..{len(space) - 1}")
    spec = space.specs[j]
    runs = []
    for f_idx, fixed in enumerate(fixed_values(spec, k)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, j, f_idx)))
        incumbent = np.empty(n_iters)
        best = -math.inf
        for i in range(n_iters):
            config = sample_uniform(space, rng)
            config[spec.name] = fixed
            score = obj.evaluate(config, 1.0, seed)
            if score > best:
                best = score
            incumbent[i] = best
        runs.append(FixedValueRun(fixed, best, incumbent))
    mean_best = float(np.mean([r.best_score for r in runs]))
    return FixedDimReport(j, mean_best, tuple(runs))


def _halving(obj, configs, b0, eta, seed, bracket, base_index):
    """One successive-halving bracket; returns (entries, finals).

    ``finals`` maps config position -> (budget, score, config) at the
    highest budget that config reached.  Survivor selection keeps the top
    floor(len/eta) by score, ties broken by earlier sampling index.
    """
    if not configs:
        raise OutOfDomain("successive halving needs at least one config")
    if b0 <= 0:
        raise OutOfDomain("initial budget must be positive")
    entries = []
    finals = {}
    survivors = list(enumerate(configs))
    budget = min(b0, 1.0)
    rnd = 0
    counter = base_index
    while True:
        scored = []
        for pos, config in survivors:
            score = obj.evaluate(config, budget, seed)
            entries.append(Evaluation(counter, bracket, rnd, budget, score, config))
            finals[pos] = (budget, score, config)
            scored.append((pos, config, score))
            counter += 1
        if len(scored) == 1 or budget >= 1.0:
            break
        keep = max(1, int(len(scored) // eta))
        scored.sort(key=lambda t: (-t[2], t[0]))
        survivors = [(pos, config) for pos, config, _ in scored[:keep]]
        budget = min(budget * eta, 1.0)
        rnd += 1
    return entries, finals, counter


def _best_of(finals):
    best = None
    for pos in sorted(finals):
        budget, score, config = finals[pos]
        if best is None or score > best[1]:
            best = (config, score)
    return best


def successive_halving(obj, configs, r0, eta=2.0, seed=0):
    """Evaluate-and-cull rounds with geometrically increasing budgets."""
    entries, finals, _ = _halving(obj, list(configs), r0, eta, seed, None, 0)
    best_config, best_score = _best_of(finals)
    return OptResult(tuple(entries), best_config, best_score)


def hyperband_schedule(s_max, eta, R=None):
    """Bracket sizes and starting budgets: (n_s, r_s) for s = s_max..0."""
    out = []
    for s in range(s_max, -1, -1):
        n_s = math.ceil((s_max + 1) / (s + 1) * eta ** s)
        r_s = eta ** (-s)
        out.append((n_s, r_s * R if R is not None else r_s))
    return out


def hyperband_round_sizes(n, eta):
    """Survivor count per round for one bracket, mirroring the halving loop."""
    sizes = [n]
    while sizes[-1] > 1:
        sizes.append(max(1, int(sizes[-1] // eta)))
    return sizes


def expected_evaluations(s_max, eta):
    """Total objective calls Hyperband makes, from the schedule alone."""
    total = 0
    for s in range(s_max, -1, -1):
        n_s = math.ceil((s_max + 1) / (s + 1) * eta ** s)
        m = n_s
        budget = min(eta ** (-s), 1.0)
        while True:
            total += m
            if m == 1 or budget >= 1.0:
                break
            m = max(1, int(m // eta))
            budget = min(budget * eta, 1.0)
    return total


def hyperband(obj, space, sampler, settings=HyperbandSettings()):
    """Hyperband: one successive-halving bracket per aggressiveness level."""
    entries = []
    best_config, best_score = None, -math.inf
    counter = 0
    for s in range(settings.s_max, -1, -1):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(settings.seed, s)))
        n_s = math.ceil((settings.s_max + 1) / (s + 1) * settings.eta ** s)
        configs = [sampler(rng) for _ in range(n_s)]
        b0 = settings.eta ** (-s)
        bracket_entries, finals, counter = _halving(
            obj, configs, b0, settings.eta, settings.seed, s, counter
        )
        entries.extend(bracket_entries)
        config, score = _best_of(finals)
        if score > best_score:
            best_config, best_score = config, score
    return OptResult(tuple(entries), best_config, best_score)


def write_trajectory_csv(result, space, path):
    """Trajectory export: iter,bracket,round,budget,score,<param columns>."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "bracket", "round", "budget", "score", *space.names])
        for e in result.trajectory:
            writer.writerow(
                [
                    e.index,
                    "" if e.bracket is None else e.bracket,
                    "" if e.round is None else e.round,
                    repr(float(e.budget)),
                    repr(float(e.score)),
                    *[_fmt(e.config[n]) for n in space.names],
                ]
            )


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)
