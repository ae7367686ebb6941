"""Regression random forests over the internal unit cube.

Each tree exposes its exact leaf partition (axis-aligned boxes with uniform
measure weights), which is what makes exact variance decomposition possible
downstream.  Trees can be grown from data or handcrafted from ``Split`` /
``Leaf`` nodes in tests.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from ._util import parallel_map
from .configspace import CATEGORICAL
from .errors import ConstantTarget, InvalidSpec, TooFewSamples

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class ForestSettings:
    """Surrogate-forest hyperparameters (overridable; see README)."""

    n_trees: int = 16
    min_samples_leaf: int = 1
    max_features_fraction: float = 5.0 / 6.0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidSpec("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidSpec("min_samples_leaf must be >= 1")
        if not 0.0 < self.max_features_fraction <= 1.0:
            raise InvalidSpec("max_features_fraction must be in (0, 1]")
        if self.seed < 0:
            raise InvalidSpec("seed must be a non-negative integer")


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    """A hand-written split node: numeric threshold or category subset."""

    dim: int
    left: "Split | Leaf"
    right: "Split | Leaf"
    threshold: float | None = None
    left_categories: frozenset | None = None


@dataclass(frozen=True)
class LeafBox:
    """One leaf's region: intervals on numeric dims, subsets on categorical."""

    intervals: tuple  # per dim: (lo, hi) or frozenset of category indices
    value: float
    weight: float

    def contains(self, u):
        """Whether an internal-space point falls inside this box."""
        for d, iv in enumerate(self.intervals):
            x = u[d]
            if isinstance(iv, frozenset):
                if int(x) not in iv:
                    return False
            else:
                lo, hi = iv
                if not (lo <= x < hi or (x == hi == 1.0)):
                    return False
        return True


class RegressionTree:
    """A binary regression tree stored as flat node arrays.

    ``feature[i] == -1`` marks a leaf with prediction ``value[i]``.  For
    categorical split dims, ``threshold[i]`` holds the bitmask of categories
    routed left.  ``is_cat``/``n_cats`` describe the dimensions of the
    internal space the tree lives in.
    """

    def __init__(self, feature, threshold, left, right, value, is_cat, n_cats):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.is_cat = np.asarray(is_cat, dtype=np.bool_)
        self.n_cats = np.asarray(n_cats, dtype=np.int64)

    @property
    def n_dims(self):
        return len(self.is_cat)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.count_nonzero(self.feature < 0))

    @classmethod
    def from_node(cls, root, n_dims, n_categories=None):
        """Flatten a handcrafted Split/Leaf structure into a tree.

        ``n_categories`` maps categorical dim index -> category count; all
        other dims are numeric.
        """
        n_categories = dict(n_categories or {})
        is_cat = np.array([d in n_categories for d in range(n_dims)], dtype=np.bool_)
        n_cats = np.array([n_categories.get(d, 0) for d in range(n_dims)], dtype=np.int64)
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node, avail_masks, boxes):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if isinstance(node, Leaf):
                value[i] = float(node.value)
                return i
            if not isinstance(node, Split):
                raise InvalidSpec(f"expected Split or Leaf, got {type(node).__name__}")
            d = node.dim
            if not 0 <= d < n_dims:
                raise InvalidSpec(f"split dim {d} outside 0..{n_dims - 1}")
            if is_cat[d]:
                if node.left_categories is None:
                    raise InvalidSpec(f"dim {d} is categorical; split needs left_categories")
                sub = frozenset(int(c) for c in node.left_categories)
                avail = avail_masks[d]
                if not sub or not sub <= avail or sub == avail:
                    raise InvalidSpec(
                        f"dim {d}: left categories {sorted(sub)} must be a proper, "
                        f"non-empty subset of the remaining categories {sorted(avail)}"
                    )
                threshold[i] = float(sum(1 << c for c in sub))
                lmask = dict(avail_masks)
                lmask[d] = sub
                rmask = dict(avail_masks)
                rmask[d] = avail - sub
                lbox = rbox = boxes
            else:
                if node.threshold is None:
                    raise InvalidSpec(f"dim {d} is numeric; split needs a threshold")
                t = float(node.threshold)
                lo, hi = boxes[d]
                if not lo < t < hi:
                    raise InvalidSpec(
                        f"dim {d}: threshold {t} outside the node's box ({lo}, {hi})"
                    )
                threshold[i] = t
                lmask = rmask = avail_masks
                lbox = dict(boxes)
                lbox[d] = (lo, t)
                rbox = dict(boxes)
                rbox[d] = (t, hi)
            feature[i] = d
            left[i] = add(node.left, lmask, lbox)
            right[i] = add(node.right, rmask, rbox)
            return i

        masks = {d: frozenset(range(n_categories[d])) for d in n_categories}
        boxes = {d: (0.0, 1.0) for d in range(n_dims) if not is_cat[d]}
        add(root, masks, boxes)
        return cls(feature, threshold, left, right, value, is_cat, n_cats)

    @cached_property
    def _leaf_data(self):
        """(values, lo, hi, cat_mask, weights) arrays for all leaves."""
        return _kernels.leaf_boxes(
            self.feature, self.threshold, self.left, self.right, self.value,
            self.is_cat, self.n_cats,
        )

    @cached_property
    def split_values(self):
        """Per numeric dim, the sorted unique thresholds used by this tree."""
        out = {}
        for d in range(self.n_dims):
            if self.is_cat[d]:
                continue
            mask = self.feature == d
            out[d] = np.unique(self.threshold[mask]) if mask.any() else np.empty(0)
        return out

    def predict_internal(self, U):
        """Leaf values for internal-space points (m x n array or single row)."""
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        return _kernels.predict_batch(
            self.feature, self.threshold, self.left, self.right, self.value,
            self.is_cat, U,
        )

    def to_dict(self):
        """Debug dump of the node arrays (not a stability-guaranteed format)."""
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"id": i, "leaf": True, "value": float(self.value[i])})
                continue
            d = int(self.feature[i])
            rec = {"id": i, "dim": d, "left": int(self.left[i]), "right": int(self.right[i])}
            if self.is_cat[d]:
                mask = int(self.threshold[i])
                rec["left_categories"] = [c for c in range(int(self.n_cats[d])) if mask >> c & 1]
            else:
                rec["threshold"] = float(self.threshold[i])
            nodes.append(rec)
        return {"nodes": nodes}


def leaf_partition(tree):
    """All leaf boxes of a tree; their weights sum to 1."""
    values, lo, hi, mask, weights = tree._leaf_data
    boxes = []
    for i in range(len(values)):
        ivs = []
        for d in range(tree.n_dims):
            if tree.is_cat[d]:
                m = int(mask[i, d])
                ivs.append(frozenset(c for c in range(int(tree.n_cats[d])) if m >> c & 1))
            else:
                ivs.append((float(lo[i, d]), float(hi[i, d])))
        boxes.append(LeafBox(tuple(ivs), float(values[i]), float(weights[i])))
    total = sum(b.weight for b in boxes)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise InvalidSpec(f"leaf weights sum to {total}, expected 1")
    return boxes


class RegressionForest:
    """An ensemble of regression trees over one configuration space."""

    def __init__(self, trees, space, settings):
        if not trees:
            raise InvalidSpec("a forest needs at least one tree")
        self.trees = tuple(trees)
        self.space = space
        self.settings = settings

    def __len__(self):
        return len(self.trees)

    def predict_internal(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        acc = np.zeros(U.shape[0])
        for tree in self.trees:
            acc += tree.predict_internal(U)
        return acc / len(self.trees)

    def predict(self, config):
        """Mean prediction for one configuration in external units."""
        u = self.space.to_internal_vector(config)
        return float(self.predict_internal(u[None, :])[0])

    def to_json(self, path):
        payload = {
            "n_trees": len(self.trees),
            "trees": [t.to_dict() for t in self.trees],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def _tree_seed_state(seed, index):
    ss = np.random.SeedSequence(entropy=(seed, index))
    state = ss.generate_state(2, dtype=np.uint64)
    return int(state[0]), np.uint64(state[1])


def fit(data, space, settings=ForestSettings(), threads=1):
    """Fit a regression forest to one dataset's runs.

    Deterministic given ``settings.seed``: per-tree RNG streams are derived
    from (seed, tree index), so results do not depend on ``threads``.
    """
    records = data.records
    if len(records) < 2:
        raise TooFewSamples(f"need at least 2 records, got {len(records)}")
    y = data.ys
    if float(np.max(y)) == float(np.min(y)):
        raise ConstantTarget("all target values are equal")
    X = np.stack([space.to_internal_vector(r.config) for r in records])
    is_cat, n_cats = space.internal_kinds
    n = len(space)
    n_feats = min(n, max(1, math.ceil(settings.max_features_fraction * n)))
    m = len(records)

    def grow(t):
        boot_seed, state = _tree_seed_state(settings.seed, t)
        if settings.bootstrap:
            idx = np.random.default_rng(boot_seed).integers(0, m, size=m)
        else:
            idx = np.arange(m)
        arrays = _kernels.grow_tree(
            X, y, idx.astype(np.int64), is_cat, n_cats,
            settings.min_samples_leaf, n_feats, state,
        )
        return RegressionTree(*arrays, is_cat, n_cats)

    trees = parallel_map(grow, range(settings.n_trees), threads)
    return RegressionForest(trees, space, settings)


def predict(forest, config):
    """Module-level alias for :meth:`RegressionForest.predict`."""
    return forest.predict(config)


def unit_kinds(n_dims, n_categories=None):
    """(is_cat, n_cats) arrays for ad-hoc internal spaces in tests."""
    n_categories = dict(n_categories or {})
    is_cat = np.array([d in n_categories for d in range(n_dims)], dtype=np.bool_)
    n_cats = np.array([n_categories.get(d, 0) for d in range(n_dims)], dtype=np.int64)
    return is_cat, n_cats
