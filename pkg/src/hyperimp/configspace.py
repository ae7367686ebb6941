"""Hyperparameter space definitions and the internal unit-cube representation.

Numeric hyperparameters are mapped onto [0, 1] (after a log2 transform for
log-scaled ranges) and categorical ones onto 0-based indices.  All model
fitting, variance integrals, and density estimation downstream happen in this
internal space, where the uniform density is identically 1.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InvalidSpec, OutOfDomain, ParseError

CONTINUOUS = "continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"

_KINDS = (CONTINUOUS, INTEGER, CATEGORICAL)

#: A configuration is a plain mapping of hyperparameter name -> external value.
Config = dict

BUILTIN_SPACES = ("svm_rbf", "svm_sigmoid", "random_forest", "adaboost")


@dataclass(frozen=True)
class HyperparameterSpec:
    """One hyperparameter: its kind, range or categories, and scale."""

    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    log_scale: bool = False
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidSpec(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if self.lo is not None or self.hi is not None or self.log_scale:
                raise InvalidSpec(f"{self.name}: categorical specs take no bounds")
            if self.categories is None or len(self.categories) < 2:
                raise InvalidSpec(f"{self.name}: need at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise InvalidSpec(f"{self.name}: duplicate categories")
            object.__setattr__(self, "categories", tuple(self.categories))
            return
        if self.categories is not None:
            raise InvalidSpec(f"{self.name}: categories only valid for categorical kind")
        if self.lo is None or self.hi is None:
            raise InvalidSpec(f"{self.name}: numeric specs need lo and hi")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidSpec(f"{self.name}: bounds must be finite")
        if not self.lo < self.hi:
            raise InvalidSpec(f"{self.name}: lo must be < hi, got [{self.lo}, {self.hi}]")
        if self.log_scale and self.lo <= 0:
            raise InvalidSpec(f"{self.name}: log scale requires lo > 0")
        if self.kind == INTEGER and not (
            float(self.lo).is_integer() and float(self.hi).is_integer()
        ):
            raise InvalidSpec(f"{self.name}: integer bounds must be whole numbers")

    @property
    def is_numeric(self):
        return self.kind != CATEGORICAL

    def _axis(self):
        if self.log_scale:
            return math.log2(self.lo), math.log2(self.hi)
        return float(self.lo), float(self.hi)

    def to_internal(self, v):
        """Map an external value into [0, 1] (numeric) or a category index."""
        if self.kind == CATEGORICAL:
            try:
                return self.categories.index(v)
            except ValueError:
                raise OutOfDomain(
                    f"{self.name}: unknown category {v!r}, expected one of {self.categories}"
                ) from None
        v = float(v)
        if v < self.lo or v > self.hi:
            raise OutOfDomain(f"{self.name}: {v} outside [{self.lo}, {self.hi}]")
        if self.kind == INTEGER and not v.is_integer():
            raise OutOfDomain(f"{self.name}: {v} is not a whole number")
        a, b = self._axis()
        x = math.log2(v) if self.log_scale else v
        return (x - a) / (b - a)

    def from_internal(self, u):
        """Inverse of :meth:`to_internal`; integers round half away from zero."""
        if self.kind == CATEGORICAL:
            i = int(u)
            if i != u or not 0 <= i < len(self.categories):
                raise OutOfDomain(f"{self.name}: invalid category index {u!r}")
            return self.categories[i]
        if not 0.0 <= u <= 1.0:
            raise OutOfDomain(f"{self.name}: internal value {u} outside [0, 1]")
        a, b = self._axis()
        x = a + u * (b - a)
        v = 2.0 ** x if self.log_scale else x
        if self.kind == INTEGER:
            v = _round_half_away(v)
            v = int(min(max(v, self.lo), self.hi))
        return v


def _round_half_away(x):
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


@dataclass(frozen=True)
class ConfigSpace:
    """An ordered, immutable collection of hyperparameter specs.

    The order of ``specs`` is canonical: it fixes the dimension indices used
    by subset selectors, forests, and all serialized artifacts.
    """

    specs: tuple[HyperparameterSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise InvalidSpec("duplicate hyperparameter names")
        if not names:
            raise InvalidSpec("a space needs at least one hyperparameter")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    @property
    def names(self):
        return tuple(s.name for s in self.specs)

    def index_of(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise OutOfDomain(f"unknown hyperparameter {name!r}") from None

    def validate_subset(self, dims):
        """Check a tuple of dimension indices: sorted, unique, in range."""
        dims = tuple(dims)
        if any(not 0 <= d < len(self.specs) for d in dims):
            raise OutOfDomain(f"subset {dims} has indices outside 0..{len(self.specs) - 1}")
        if len(set(dims)) != len(dims) or list(dims) != sorted(dims):
            raise OutOfDomain(f"subset {dims} must be sorted and duplicate-free")
        return dims

    def validate_config(self, config):
        """Raise OutOfDomain unless ``config`` has every value in-domain."""
        missing = [s.name for s in self.specs if s.name not in config]
        if missing:
            raise OutOfDomain(f"config missing values for {missing}")
        for s in self.specs:
            s.to_internal(config[s.name])

    def to_internal_vector(self, config):
        """Config -> float vector in internal space (category indices as floats)."""
        return np.array(
            [float(s.to_internal(config[s.name])) for s in self.specs], dtype=np.float64
        )

    def from_internal_vector(self, u):
        """Float vector in internal space -> Config with external values."""
        out = {}
        for s, ui in zip(self.specs, u):
            out[s.name] = s.from_internal(int(ui) if s.kind == CATEGORICAL else float(ui))
        return out

    @property
    def internal_kinds(self):
        """Per-dim (is_categorical, n_categories) used by forest internals."""
        is_cat = np.array([s.kind == CATEGORICAL for s in self.specs], dtype=np.bool_)
        n_cats = np.array(
            [len(s.categories) if s.kind == CATEGORICAL else 0 for s in self.specs],
            dtype=np.int64,
        )
        return is_cat, n_cats


def sample_uniform(space, rng):
    """Draw one configuration uniformly in internal space and map it out."""
    config = {}
    for s in space.specs:
        if s.kind == CATEGORICAL:
            config[s.name] = s.categories[int(rng.integers(len(s.categories)))]
        else:
            config[s.name] = s.from_internal(float(rng.random()))
    return config


def _spec_to_dict(spec):
    if spec.kind == CATEGORICAL:
        return {"name": spec.name, "type": CATEGORICAL, "categories": list(spec.categories)}
    return {
        "name": spec.name,
        "type": spec.kind,
        "lo": spec.lo,
        "hi": spec.hi,
        "log": spec.log_scale,
    }


def _spec_from_dict(d, where):
    if not isinstance(d, dict) or "name" not in d or "type" not in d:
        raise ParseError(f"{where}: each hyperparameter needs 'name' and 'type'")
    kind = d["type"]
    if kind == CATEGORICAL:
        extras = {"lo", "hi", "log"} & set(d)
        if extras:
            raise ParseError(f"{where}: categorical entry has numeric fields {sorted(extras)}")
        if "categories" not in d:
            raise ParseError(f"{where}: categorical entry missing 'categories'")
        return HyperparameterSpec(d["name"], CATEGORICAL, categories=tuple(d["categories"]))
    if kind in (CONTINUOUS, INTEGER):
        if "categories" in d:
            raise ParseError(f"{where}: numeric entry has 'categories'")
        if "lo" not in d or "hi" not in d or "log" not in d:
            raise ParseError(f"{where}: numeric entry needs 'lo', 'hi' and 'log'")
        return HyperparameterSpec(d["name"], kind, lo=d["lo"], hi=d["hi"], log_scale=bool(d["log"]))
    raise ParseError(f"{where}: unknown type {kind!r}")


def save_space(space, path):
    """Write a space definition as JSON."""
    payload = {"hyperparameters": [_spec_to_dict(s) for s in space.specs]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _space_from_payload(payload, origin):
    if not isinstance(payload, dict) or "hyperparameters" not in payload:
        raise ParseError(f"{origin}: expected an object with a 'hyperparameters' list")
    entries = payload["hyperparameters"]
    if not isinstance(entries, list):
        raise ParseError(f"{origin}: 'hyperparameters' must be a list")
    specs = [
        _spec_from_dict(d, f"{origin}: hyperparameter #{i}") for i, d in enumerate(entries)
    ]
    return ConfigSpace(tuple(specs))


def load_space(path):
    """Load a space definition from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from None
    return _space_from_payload(payload, str(path))


def builtin_space(name):
    """Load one of the space definitions shipped with the package."""
    if name not in BUILTIN_SPACES:
        raise OutOfDomain(f"unknown builtin space {name!r}, expected one of {BUILTIN_SPACES}")
    text = resources.files("hyperimp.spaces").joinpath(f"{name}.json").read_text("utf-8")
    return _space_from_payload(json.loads(text), f"builtin:{name}")
