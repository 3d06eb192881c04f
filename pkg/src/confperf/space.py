"""Configuration spaces, configurations, sample sets and measurement tables."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import constraints as cx

DEFAULT_ENUMERATION_CAP = 10_000_000


class SpaceError(ValueError):
    """Malformed variability model or configuration."""


class UnknownOptionError(SpaceError):
    pass


class EnumerationCapError(SpaceError):
    pass


def format_value(x) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class BinaryOption:
    name: str

    @property
    def values(self) -> tuple[int, int]:
        return (0, 1)


@dataclass(frozen=True)
class NumericOption:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise SpaceError(f"numeric option {self.name!r} needs at least 2 domain values")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise SpaceError(f"domain of {self.name!r} must be strictly ascending without duplicates")
        object.__setattr__(self, "values", vals)

    @property
    def min(self) -> float:
        return self.values[0]

    @property
    def max(self) -> float:
        return self.values[-1]

    def snap(self, value: float) -> float:
        """Nearest domain member; ties go to the smaller value."""
        vals = np.asarray(self.values)
        i = int(np.searchsorted(vals, value))
        if i <= 0:
            return self.values[0]
        if i >= len(vals):
            return self.values[-1]
        lo, hi = vals[i - 1], vals[i]
        return float(lo) if value - lo <= hi - value else float(hi)

    @property
    def center(self) -> float:
        return self.snap((self.min + self.max) / 2.0)


@dataclass(frozen=True)
class Constraint:
    text: str
    expression: object = field(compare=False, repr=False)

    @classmethod
    def parse(cls, text: str) -> "Constraint":
        return cls(text, cx.parse_expression(text))

    @property
    def options(self) -> frozenset[str]:
        return cx.referenced_names(self.expression)

    def holds(self, env: Mapping[str, object]):
        return cx.evaluate(self.expression, env)


class Configuration(Mapping):
    """Immutable, hashable assignment of option names to values."""

    __slots__ = ("_values", "_hash")

    def __init__(self, values: Mapping[str, float] | Iterable[tuple[str, float]] = ()):
        items = dict(values)
        self._values = {k: (int(v) if float(v).is_integer() else float(v)) for k, v in items.items()}
        self._hash = hash(frozenset(self._values.items()))

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Configuration):
            return self._values == other._values
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in self._values.items())
        return f"Configuration({inner})"

    def merge(self, other: "Configuration") -> "Configuration":
        overlap = set(self) & set(other)
        if overlap:
            raise SpaceError(f"configurations overlap on {sorted(overlap)}")
        return Configuration({**self._values, **other._values})

    def enabled(self) -> frozenset[str]:
        """Names whose value is non-zero (for binary sub-space members)."""
        return frozenset(k for k, v in self._values.items() if v != 0)


@dataclass(frozen=True)
class ConfigurationSpace:
    binary_options: tuple[BinaryOption, ...] = ()
    numeric_options: tuple[NumericOption, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "binary_options", tuple(self.binary_options))
        object.__setattr__(self, "numeric_options", tuple(self.numeric_options))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = self.option_names
        seen = set()
        for n in names:
            if n in seen:
                raise SpaceError(f"duplicate option name {n!r}")
            seen.add(n)
        for c in self.constraints:
            unknown = sorted(c.options - seen)
            if unknown:
                raise UnknownOptionError(f"unknown option {unknown[0]!r} in constraint {c.text!r}")

    @property
    def options(self) -> tuple:
        return self.binary_options + self.numeric_options

    @property
    def option_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.options)

    @property
    def binary_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.binary_options)

    @property
    def numeric_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.numeric_options)

    def option(self, name: str):
        for o in self.options:
            if o.name == name:
                return o
        raise UnknownOptionError(f"unknown option {name!r}")

    def is_binary(self, name: str) -> bool:
        return name in self.binary_names

    def domains(self) -> list[tuple[float, ...]]:
        return [tuple(float(v) for v in o.values) for o in self.options]

    def raw_size(self) -> int:
        return math.prod(len(o.values) for o in self.options)

    def constraints_within(self, names: Iterable[str]) -> tuple[Constraint, ...]:
        names = set(names)
        return tuple(c for c in self.constraints if c.options <= names)

    def binary_subspace(self) -> "ConfigurationSpace":
        return ConfigurationSpace(self.binary_options, (), self.constraints_within(self.binary_names))

    def numeric_subspace(self) -> "ConfigurationSpace":
        return ConfigurationSpace((), self.numeric_options, self.constraints_within(self.numeric_names))

    def mixed_constraints(self) -> tuple[Constraint, ...]:
        b, n = set(self.binary_names), set(self.numeric_names)
        return tuple(c for c in self.constraints if not (c.options <= b or c.options <= n))

    # -- configurations <-> rows ----------------------------------------

    def row(self, config: Mapping[str, float]) -> np.ndarray:
        missing = [n for n in self.option_names if n not in config]
        if missing:
            raise SpaceError(f"partial assignment: missing {missing}")
        extra = sorted(set(config) - set(self.option_names))
        if extra:
            raise UnknownOptionError(f"unknown option {extra[0]!r} in configuration")
        return np.array([float(config[n]) for n in self.option_names])

    def config(self, row: Sequence[float]) -> Configuration:
        return Configuration(zip(self.option_names, row))

    def check_domains(self, X: np.ndarray) -> np.ndarray:
        """Boolean mask: every value of the row is a member of its option's domain."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ok = np.ones(len(X), dtype=bool)
        for j, opt in enumerate(self.options):
            dom = np.asarray(opt.values, dtype=float)
            ok &= np.isin(X[:, j], dom)
        return ok

    def valid_mask(self, X: np.ndarray, constraints: Sequence[Constraint] | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        env = {n: X[:, j] for j, n in enumerate(self.option_names)}
        mask = np.ones(len(X), dtype=bool)
        for c in self.constraints if constraints is None else constraints:
            mask &= np.broadcast_to(c.holds(env), mask.shape)
        return mask

    def to_dict(self) -> dict:
        return {
            "binary": [o.name for o in self.binary_options],
            "numeric": [{"name": o.name, "values": [_json_num(v) for v in o.values]} for o in self.numeric_options],
            "constraints": [c.text for c in self.constraints],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _json_num(v: float):
    return int(v) if float(v).is_integer() else float(v)


# -- parsing ---------------------------------------------------------------


def _expand_numeric(entry: Mapping) -> NumericOption:
    name = entry.get("name")
    if not isinstance(name, str) or not name:
        raise SpaceError(f"numeric option without a name: {entry!r}")
    if "values" in entry:
        values = list(entry["values"])
        if not values:
            raise SpaceError(f"empty domain for numeric option {name!r}")
    elif {"min", "max"} <= set(entry):
        lo, hi = float(entry["min"]), float(entry["max"])
        step = float(entry.get("step", 1))
        if step <= 0 or hi < lo:
            raise SpaceError(f"empty domain for numeric option {name!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        values = [round(lo + i * step, 12) for i in range(count)]
    else:
        raise SpaceError(f"numeric option {name!r} needs 'values' or 'min'/'max'")
    if len(values) < 2:
        raise SpaceError(f"degenerate domain for numeric option {name!r} (needs min < max)")
    return NumericOption(name, tuple(values))


def space_from_dict(data: Mapping) -> ConfigurationSpace:
    binary = data.get("binary", [])
    numeric = data.get("numeric", [])
    if not isinstance(binary, list) or not isinstance(numeric, list):
        raise SpaceError("'binary' and 'numeric' must be lists")
    options_b = [BinaryOption(str(n)) for n in binary]
    options_n = [_expand_numeric(e) for e in numeric]
    if not options_b and not options_n:
        raise SpaceError("a configuration space needs at least one option")
    constrs = [Constraint.parse(str(t)) for t in data.get("constraints", [])]
    return ConfigurationSpace(tuple(options_b), tuple(options_n), tuple(constrs))


def parse_space(text: str) -> ConfigurationSpace:
    """Parse a JSON variability model (``binary``, ``numeric``, ``constraints``)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SpaceError("variability model must be a JSON object")
    return space_from_dict(data)


def load_space(path) -> ConfigurationSpace:
    with open(path) as fh:
        return parse_space(fh.read())


# -- enumeration -------------------------------------------------------------


def _blocks(space: ConfigurationSpace, block: int) -> Iterator[np.ndarray]:
    sizes = [len(d) for d in space.domains()]
    total = math.prod(sizes)
    doms = [np.asarray(d, dtype=float) for d in space.domains()]
    strides = [math.prod(sizes[j + 1:]) for j in range(len(sizes))]
    for start in range(0, total, block):
        idx = np.arange(start, min(total, start + block), dtype=np.int64)
        cols = [doms[j][(idx // strides[j]) % sizes[j]] for j in range(len(sizes))]
        yield np.column_stack(cols) if cols else np.zeros((len(idx), 0))


def valid_matrix(space: ConfigurationSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All valid configurations as rows (declared option order, lexicographic)."""
    raw = space.raw_size()
    if raw > cap:
        raise EnumerationCapError(f"raw space size {raw} exceeds enumeration cap {cap}")
    parts = [X[space.valid_mask(X)] for X in _blocks(space, 1 << 18)]
    if not parts:
        return np.zeros((0, len(space.options)))
    return np.concatenate(parts)


def enumerate_valid(space: ConfigurationSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[Configuration]:
    raw = space.raw_size()
    if raw > cap:
        raise EnumerationCapError(f"raw space size {raw} exceeds enumeration cap {cap}")
    for X in _blocks(space, 1 << 16):
        for row in X[space.valid_mask(X)]:
            yield space.config(row)


def count_valid(space: ConfigurationSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    raw = space.raw_size()
    if raw > cap:
        raise EnumerationCapError(f"raw space size {raw} exceeds enumeration cap {cap}")
    return int(sum(int(space.valid_mask(X).sum()) for X in _blocks(space, 1 << 18)))


def is_valid(space: ConfigurationSpace, config: Mapping[str, float]) -> bool:
    row = space.row(config)
    if not space.check_domains(row)[0]:
        return False
    return bool(space.valid_mask(row[None, :])[0])


# -- sample sets -------------------------------------------------------------


@dataclass(frozen=True)
class SampleSet:
    members: tuple[Configuration, ...]
    strategy: str
    params: Mapping = field(default_factory=dict)
    seed: int | None = None
    requested_size: int | None = None  # None: strategy-determined
    skipped: tuple[str, ...] = ()

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def provenance(self) -> dict:
        return {
            "strategy": self.strategy,
            "params": dict(self.params),
            "seed": self.seed,
            "requested_size": self.requested_size if self.requested_size is not None else "strategy-determined",
            "size": len(self.members),
            "skipped": list(self.skipped),
        }

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.array([[float(c[n]) for n in names] for c in self.members]).reshape(len(self.members), len(names))

    def to_csv(self, names: Sequence[str]) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(names)
        for c in self.members:
            w.writerow([format_value(c[n]) for n in names])
        return out.getvalue()


def dedupe(configs: Iterable[Configuration]) -> list[Configuration]:
    seen = set()
    out = []
    for c in configs:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


# -- measurement tables ------------------------------------------------------


class MeasurementError(SpaceError):
    pass


class MeasurementTable:
    """Measured performance per configuration; rows in declared option order."""

    def __init__(self, space: ConfigurationSpace, X, y, system: str = "system", metric: str = "performance"):
        X = np.asarray(X, dtype=float).reshape(-1, len(space.options))
        y = np.asarray(y, dtype=float).ravel()
        if len(X) != len(y):
            raise MeasurementError("row/label count mismatch")
        if len(y) and not np.all(y > 0):
            bad = int(np.flatnonzero(~(y > 0))[0])
            raise MeasurementError(f"non-positive performance value at row {bad}")
        self.space = space
        self.X = X
        self.y = y
        self.system = system
        self.metric = metric
        self._index = {}
        for i, row in enumerate(map(tuple, X)):
            if row in self._index:
                raise MeasurementError(f"duplicate configuration at row {i}")
            self._index[row] = i
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    def __len__(self):
        return len(self.y)

    def index_of(self, row) -> int:
        return self._index[tuple(float(v) for v in row)]

    def lookup(self, X) -> np.ndarray:
        """Row indices for each row of ``X``; raises KeyError on unmeasured rows."""
        return np.array([self._index[tuple(r)] for r in np.asarray(X, dtype=float)], dtype=np.int64)

    def performance(self, config: Mapping[str, float]) -> float:
        return float(self.y[self.index_of(self.space.row(config))])

    @property
    def rows(self) -> dict:
        return {self.space.config(r): float(v) for r, v in zip(self.X, self.y)}

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(self.space.option_names) + ["performance"])
        for r, v in zip(self.X, self.y):
            w.writerow([format_value(x) for x in r] + [repr(float(v))])
        return out.getvalue()


def read_measurements(path, space: ConfigurationSpace, system: str | None = None,
                      metric: str = "performance") -> MeasurementTable:
    """Load a measurement CSV keyed by column names; invalid rows are errors with line numbers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MeasurementError(f"{path}: empty file") from None
        missing = [n for n in space.option_names if n not in header]
        if missing:
            raise MeasurementError(f"{path}: missing column {missing[0]!r}")
        if "performance" not in header:
            raise MeasurementError(f"{path}: missing column 'performance'")
        cols = [header.index(n) for n in space.option_names]
        pcol = header.index("performance")
        rows, ys, lines = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            try:
                rows.append([float(rec[c]) for c in cols])
                ys.append(float(rec[pcol]))
            except (ValueError, IndexError) as exc:
                raise MeasurementError(f"{path}: line {lineno}: {exc}") from None
            if not ys[-1] > 0:
                raise MeasurementError(f"{path}: line {lineno}: non-positive performance {rec[pcol]!r}")
            lines.append(lineno)
    X = np.array(rows, dtype=float).reshape(len(rows), len(space.options))
    ok = space.check_domains(X) & space.valid_mask(X)
    if not ok.all():
        bad = [lines[i] for i in np.flatnonzero(~ok)]
        raise MeasurementError(f"{path}: invalid configuration on line(s) {bad[:10]}")
    seen = {}
    for i, row in enumerate(map(tuple, X)):
        if row in seen:
            raise MeasurementError(f"{path}: line {lines[i]} duplicates line {seen[row]}")
        seen[row] = lines[i]
    return MeasurementTable(space, X, ys, system=system or str(path), metric=metric)


def cartesian_rows(*sets: np.ndarray) -> np.ndarray:
    """Row-wise cartesian product (first factor varies slowest)."""
    if not sets:
        return np.zeros((1, 0))
    idx = itertools.product(*(range(len(s)) for s in sets))
    rows = [np.concatenate([s[i] for s, i in zip(sets, combo)]) for combo in idx]
    width = sum(s.shape[1] for s in sets)
    return np.array(rows, dtype=float).reshape(len(rows), width)
