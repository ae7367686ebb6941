"""Exact functional ANOVA of tree and forest predictions.

A tree's prediction is piecewise constant on the grid induced by its own
split values, so marginal means and variance contributions integrate exactly
over that grid -- no sampling involved.  The contribution of a dimension
subset U is computed from squared-marginal integrals via

    V_U = integral(marginal_U^2) - mean^2 - sum of V_W over proper subsets W,

which is the standard recursion for ANOVA components under a product measure
(uniform on [0,1] per numeric dim, uniform over categories otherwise).
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._util import parallel_map
from .errors import ConstantModel, DegenerateTree, OutOfDomain

_EINSUM_LETTERS = "abcdefgh"


@dataclass(frozen=True)
class TreeDecomposition:
    """One tree's total variance, mean, and per-subset contributions."""

    total_variance: float
    mean: float
    contributions: dict
    max_order: int


@dataclass(frozen=True)
class VarianceDecomposition:
    """Forest-level importance: mean over trees of per-tree V_U / V.

    ``per_tree`` keeps one entry per tree (None for zero-variance trees that
    were skipped).  ``fractions`` holds raw means; tiny negative values from
    floating-point cancellation are only clamped in reports.
    """

    per_tree: tuple
    fractions: dict
    max_order: int

    def clamped_fractions(self):
        return {u: min(max(f, 0.0), 1.0) for u, f in self.fractions.items()}


def _validate_dims(tree, dims):
    dims = tuple(int(d) for d in dims)
    if any(not 0 <= d < tree.n_dims for d in dims):
        raise OutOfDomain(f"subset {dims} outside 0..{tree.n_dims - 1}")
    if len(set(dims)) != len(dims) or list(dims) != sorted(dims):
        raise OutOfDomain(f"subset {dims} must be sorted and duplicate-free")
    return dims


def _cat_bits(mask_col, nc):
    """Leaf-by-category 0/1 coverage matrix from subset bitmasks."""
    return ((mask_col[:, None] >> np.arange(nc)) & 1).astype(np.float64)


def _edges(tree, d):
    return np.concatenate(([0.0], tree.split_values[d], [1.0]))


def _dim_measure(tree, d, lo, hi, mask):
    if tree.is_cat[d]:
        nc = int(tree.n_cats[d])
        return _cat_bits(mask[:, d], nc).sum(axis=1) / nc
    return hi[:, d] - lo[:, d]


def _leaf_weights_over(tree, dims):
    """Per-leaf c_l times the box measure of all dims NOT in ``dims``."""
    values, lo, hi, mask, w = tree._leaf_data
    z = values * w
    for d in dims:
        z = z / _dim_measure(tree, d, lo, hi, mask)
    return z, lo, hi, mask


def _numeric_cells(tree, d, lo, hi):
    """(cell widths, start index, end index) on dim d's split grid."""
    edges = _edges(tree, d)
    si = np.searchsorted(edges, lo[:, d])
    ei = np.searchsorted(edges, hi[:, d])
    return np.diff(edges), si.astype(np.int64), ei.astype(np.int64)


def _profile_1d(si, ei, z, n_cells):
    diff = np.zeros(n_cells + 1)
    np.add.at(diff, si, z)
    np.add.at(diff, ei, -z)
    return np.cumsum(diff)[:n_cells]


def _square_integral(tree, dims):
    """Integral of the squared marginal over the U-projected split grid."""
    z, lo, hi, mask = _leaf_weights_over(tree, dims)

    if len(dims) == 1:
        d = dims[0]
        if tree.is_cat[d]:
            nc = int(tree.n_cats[d])
            a = _cat_bits(mask[:, d], nc).T @ z
            return float(np.sum(a * a) / nc)
        widths, si, ei = _numeric_cells(tree, d, lo, hi)
        a = _profile_1d(si, ei, z, len(widths))
        return float(np.dot(widths, a * a))

    if len(dims) == 2:
        d1, d2 = dims
        c1, c2 = bool(tree.is_cat[d1]), bool(tree.is_cat[d2])
        if not c1 and not c2:
            w1, si1, ei1 = _numeric_cells(tree, d1, lo, hi)
            w2, si2, ei2 = _numeric_cells(tree, d2, lo, hi)
            prefix = np.concatenate(([0.0], np.cumsum(w1)))
            return float(
                _kernels.pair_square_integral(si1, ei1, si2, ei2, z, prefix, w2)
            )
        if c1 and c2:
            n1, n2 = int(tree.n_cats[d1]), int(tree.n_cats[d2])
            b1 = _cat_bits(mask[:, d1], n1)
            b2 = _cat_bits(mask[:, d2], n2)
            grid = b1.T @ (z[:, None] * b2)
            return float(np.sum(grid * grid) / (n1 * n2))
        dn, dc = (d2, d1) if c1 else (d1, d2)
        nc = int(tree.n_cats[dc])
        bits = _cat_bits(mask[:, dc], nc)
        widths, si, ei = _numeric_cells(tree, dn, lo, hi)
        total = 0.0
        for c in range(nc):
            sel = bits[:, c] > 0
            a = _profile_1d(si[sel], ei[sel], z[sel], len(widths))
            total += np.dot(widths, a * a) / nc
        return float(total)

    # general case: materialize the projected grid (small trees / order 3)
    covs, weights = [], []
    for d in dims:
        if tree.is_cat[d]:
            nc = int(tree.n_cats[d])
            covs.append(_cat_bits(mask[:, d], nc))
            weights.append(np.full(nc, 1.0 / nc))
        else:
            w, si, ei = _numeric_cells(tree, d, lo, hi)
            cells = np.arange(len(w))
            covs.append(((cells >= si[:, None]) & (cells < ei[:, None])).astype(np.float64))
            weights.append(w)
    letters = _EINSUM_LETTERS[: len(dims)]
    spec = "l," + ",".join(f"l{c}" for c in letters) + "->" + letters
    grid = np.einsum(spec, z, *covs)
    sq = grid * grid
    for axis, w in enumerate(weights):
        shape = [1] * len(dims)
        shape[axis] = len(w)
        sq = sq * w.reshape(shape)
    return float(sq.sum())


def marginal(tree, dims, values):
    """Mean prediction over all completions of a partial instantiation.

    ``dims`` are sorted dimension indices; ``values`` their internal-space
    values (floats in [0,1], or category indices).  Cost is linear in the
    number of leaves.
    """
    dims = _validate_dims(tree, dims)
    if len(values) != len(dims):
        raise OutOfDomain(f"{len(dims)} dims but {len(values)} values")
    z, lo, hi, mask = _leaf_weights_over(tree, dims)
    keep = np.ones(len(z), dtype=np.bool_)
    for d, v in zip(dims, values):
        if tree.is_cat[d]:
            code = int(v)
            if code != v or not 0 <= code < int(tree.n_cats[d]):
                raise OutOfDomain(f"dim {d}: invalid category index {v!r}")
            keep &= ((mask[:, d] >> code) & 1) == 1
        else:
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise OutOfDomain(f"dim {d}: internal value {v} outside [0, 1]")
            keep &= (lo[:, d] <= v) & ((v < hi[:, d]) | ((v == 1.0) & (hi[:, d] == 1.0)))
    return float(z[keep].sum())


def decompose_tree(tree, max_order=2):
    """Variance contributions V_U for all subsets with 1 <= |U| <= max_order."""
    if not 1 <= max_order <= 3:
        raise OutOfDomain(f"max_order must be 1, 2 or 3, got {max_order}")
    values, lo, hi, mask, w = tree._leaf_data
    mean = float(np.dot(w, values))
    second = float(np.dot(w, values * values))
    total = second - mean * mean
    if total <= 0.0 or float(np.max(values) - np.min(values)) == 0.0:
        raise DegenerateTree("tree prediction has zero variance")

    contributions = {}
    for order in range(1, min(max_order, tree.n_dims) + 1):
        for u in itertools.combinations(range(tree.n_dims), order):
            s = _square_integral(tree, u)
            lower = 0.0
            for sub_order in range(1, order):
                for wsub in itertools.combinations(u, sub_order):
                    lower += contributions[wsub]
            contributions[u] = s - mean * mean - lower
    return TreeDecomposition(total, mean, contributions, max_order)


def importance(forest, max_order=2, threads=1):
    """Forest-level importance fractions, averaged over non-degenerate trees."""

    def one(tree):
        try:
            return decompose_tree(tree, max_order)
        except DegenerateTree:
            return None

    per_tree = tuple(parallel_map(one, forest.trees, threads))
    kept = [d for d in per_tree if d is not None]
    if not kept:
        raise ConstantModel("every tree in the forest has zero variance")
    fractions = {}
    for u in kept[0].contributions:
        fractions[u] = float(
            np.mean([d.contributions[u] / d.total_variance for d in kept])
        )
    return VarianceDecomposition(per_tree, fractions, max_order)


def top_interactions(vd, k=3):
    """The k interaction subsets (|U| >= 2) with the largest fractions."""
    if vd.max_order < 2:
        raise OutOfDomain("top_interactions needs a decomposition with max_order >= 2")
    pairs = [(u, f) for u, f in vd.fractions.items() if len(u) >= 2]
    pairs.sort(key=lambda item: (-item[1], item[0]))
    return pairs[:k]


def subset_key(space, dims):
    """Report key for a subset: spec names joined with '*' in space order."""
    return "*".join(space.names[d] for d in sorted(dims))


def importance_report(vd, space, dataset_id):
    """JSON-ready fragment with clamped fractions for one dataset."""
    fractions = {
        subset_key(space, u): f for u, f in sorted(vd.clamped_fractions().items())
    }
    totals = [d.total_variance for d in vd.per_tree if d is not None]
    return {
        "dataset_id": dataset_id,
        "fractions": fractions,
        "v_total_mean": float(np.mean(totals)),
    }
