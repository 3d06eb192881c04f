"""Error metrics, stability, significance tests, effect sizes and Pareto fronts."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import ndtr

EXACT_LIMIT = 25
CLIFF_BANDS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


class StatisticsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ExperimentCell:
    learner: str
    binary: str
    numeric: str
    system: str
    learning_set_size: int
    mean_error: float
    per_config_errors: tuple | None = field(default=None, compare=False, repr=False)
    product_size: int = 0
    filtered: int = 0
    system_size: int = 0
    n_runs: int = 1
    cv_error: float = math.nan
    hyperparams: str = "{}"
    status: str = "ok"

    @property
    def key(self) -> tuple:
        return (self.system, self.learner, self.binary, self.numeric)


# -- errors ------------------------------------------------------------------


def relative_errors(measured, predicted) -> np.ndarray:
    measured = np.asarray(measured, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if measured.shape != predicted.shape:
        raise ValueError("measured and predicted differ in shape")
    if len(measured) == 0:
        raise ValueError("no measurements")
    if not np.all(measured > 0):
        raise ValueError("measured performance must be > 0")
    return np.abs(measured - predicted) / measured


def mean_relative_error(measured, predicted) -> float:
    return float(np.mean(relative_errors(measured, predicted)))


def mean_error(predictor, table, exclude_rows=None) -> float:
    """Mean relative error of ``predictor`` over every row of ``table``.

    ``exclude_rows`` (row indices, e.g. the learning set) are left out on request.
    """
    X, y = table.X, table.y
    if exclude_rows is not None and len(exclude_rows):
        keep = np.ones(len(y), dtype=bool)
        keep[np.asarray(exclude_rows, dtype=np.int64)] = False
        X, y = X[keep], y[keep]
    return mean_relative_error(y, predictor.predict_rows(X))


def performance_variation(values) -> float:
    """(max - min) / min of measured performance (accepts a table or raw values)."""
    v = np.asarray(getattr(values, "y", values), dtype=float)
    if len(v) == 0 or not np.all(v > 0):
        raise ValueError("performance values must be non-empty and positive")
    return float((v.max() - v.min()) / v.min())


# -- stability and research-question predicates -------------------------------


def stability_range(errors: Iterable[float]) -> float:
    e = np.asarray(list(errors), dtype=float)
    if len(e) == 0:
        raise ValueError("empty group")
    return float(e.max() - e.min())


def group_cells(cells: Iterable[ExperimentCell], by: Sequence[str]) -> dict[tuple, list[ExperimentCell]]:
    out: dict[tuple, list[ExperimentCell]] = {}
    for c in cells:
        out.setdefault(tuple(getattr(c, k) for k in by), []).append(c)
    return out


def stability(cells: Iterable[ExperimentCell], by: Sequence[str]) -> dict[tuple, float]:
    """Max minus min mean error per group, e.g. ``by=("learner", "system")`` for learners."""
    return {k: stability_range(c.mean_error for c in g) for k, g in sorted(group_cells(cells, by).items())}


def _uniform_winner(cells, dim: str, context: Sequence[str]):
    """The value of ``dim`` strictly best in every context, or None."""
    cells = list(cells)
    values = sorted({getattr(c, dim) for c in cells})
    for cand in values:
        ok = True
        for _, group in group_cells(cells, context).items():
            mine = [c.mean_error for c in group if getattr(c, dim) == cand]
            others = [c.mean_error for c in group if getattr(c, dim) != cand]
            if not mine or any(not mine[0] < o for o in others):
                ok = False
                break
        if ok:
            return cand
    return None


def _most_stable(cells, dim: str):
    cells = list(cells)
    rng = stability(cells, (dim, "system"))
    values = sorted({k[0] for k in rng})
    systems = sorted({k[1] for k in rng})
    for cand in values:
        if all(rng[(cand, s)] < rng[(o, s)] for s in systems for o in values if o != cand and (o, s) in rng):
            return cand
    return None


def rq1_1(cells):
    """Learner with smaller error than every other learner in every (b, n, s) context."""
    return _uniform_winner(cells, "learner", ("binary", "numeric", "system"))


def rq1_2(cells):
    """Learner whose error range over sampling strategies is smallest on every system."""
    return _most_stable(cells, "learner")


def rq2_1(cells):
    """(best binary strategy, best numeric strategy) under the same-context comparison."""
    return (_uniform_winner(cells, "binary", ("learner", "numeric", "system")),
            _uniform_winner(cells, "numeric", ("learner", "binary", "system")))


def rq2_2(cells):
    return _most_stable(cells, "binary"), _most_stable(cells, "numeric")


def rq3_1(cells):
    """(learner, binary, numeric) combination beating every other combination on every system."""
    cells = list(cells)
    by_combo = group_cells(cells, ("learner", "binary", "numeric"))
    systems = sorted({c.system for c in cells})
    for combo in sorted(by_combo):
        ok = True
        for s in systems:
            mine = [c.mean_error for c in by_combo[combo] if c.system == s]
            others = [c.mean_error for c in cells if c.system == s
                      and (c.learner, c.binary, c.numeric) != combo]
            if not mine or any(not mine[0] < o for o in others):
                ok = False
                break
        if ok:
            return combo
    return None


# -- statistics ---------------------------------------------------------------


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    xs = x[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def wilcoxon_one_sided(a, b, exact: bool | None = None) -> float:
    """P-value of the paired signed-rank test for "a is stochastically smaller than b".

    Zero differences are dropped. Up to 25 pairs the null distribution of the
    positive rank sum is enumerated exactly (midranks for ties); above that a
    normal approximation with tie and continuity correction is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        warnings.warn("all differences are zero; p = 1", StatisticsWarning, stacklevel=2)
        return 1.0
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if exact is None:
        exact = n <= EXACT_LIMIT
    if exact:
        # doubled midranks are integers, so the rank sum has an integer lattice
        r2 = np.rint(2 * ranks).astype(np.int64)
        total = int(r2.sum())
        counts = np.zeros(total + 1, dtype=object)
        counts[0] = 1
        for r in r2:
            counts[r:] = counts[r:] + counts[:total + 1 - r].copy()
        obs = int(round(2 * w_plus))
        return float(sum(counts[:obs + 1]) / 2 ** n)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w_plus - mean + 0.5) / math.sqrt(var)
    return float(ndtr(z))


def cliffs_magnitude(delta: float) -> str:
    m = abs(delta)
    for bound, label in CLIFF_BANDS:
        if m < bound:
            return label
    return "large"


def cliffs_delta(a, b) -> tuple[float, str]:
    """(#(x > y) - #(x < y)) / (|a| |b|) over all pairs, with its magnitude label."""
    a = np.asarray(a, dtype=float)
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    below = np.searchsorted(b, a, side="left")  # count of y < x
    above = len(b) - np.searchsorted(b, a, side="right")  # count of y > x
    delta = (int(below.sum()) - int(above.sum())) / (len(a) * len(b))
    return delta, cliffs_magnitude(delta)


@dataclass
class StatsComparison:
    """Pairwise one-sided tests: entry [i][j] asks whether ``names[i]`` beats ``names[j]``."""

    dimension: str
    names: list[str]
    p_value: np.ndarray
    delta: np.ndarray
    magnitude: list[list[str]]
    n_pairs: np.ndarray


def compare(cells: Iterable[ExperimentCell], dimension: str, on_warning: Callable | None = None) -> StatsComparison:
    """Paired comparison of the values of ``dimension`` ("learner", "binary" or "numeric").

    Pairs are matched on the remaining dimensions plus system; pairs with a
    non-finite error on either side are left out. No multiple-comparison
    correction is applied.
    """
    dims = ("learner", "binary", "numeric")
    if dimension not in dims:
        raise ValueError(f"dimension must be one of {dims}")
    context = tuple(d for d in dims if d != dimension) + ("system",)
    table: dict[str, dict[tuple, float]] = {}
    for c in cells:
        table.setdefault(getattr(c, dimension), {})[tuple(getattr(c, k) for k in context)] = c.mean_error
    names = sorted(table)
    k = len(names)
    p = np.full((k, k), np.nan)
    delta = np.full((k, k), np.nan)
    npairs = np.zeros((k, k), dtype=int)
    mag = [["" for _ in range(k)] for _ in range(k)]
    for i, ni in enumerate(names):
        for j, nj in enumerate(names):
            if i == j:
                continue
            keys = sorted(set(table[ni]) & set(table[nj]))
            a = np.array([table[ni][t] for t in keys])
            b = np.array([table[nj][t] for t in keys])
            ok = np.isfinite(a) & np.isfinite(b)
            a, b = a[ok], b[ok]
            npairs[i, j] = len(a)
            if len(a) == 0:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", StatisticsWarning)
                p[i, j] = wilcoxon_one_sided(a, b)
            delta[i, j], mag[i][j] = cliffs_delta(a, b)
    return StatsComparison(dimension, names, p, delta, mag, npairs)


# -- Pareto -------------------------------------------------------------------


@dataclass(frozen=True)
class ParetoPoint:
    combo: str
    relative_size: float
    mean_error: float

    def __post_init__(self):
        if not 0 < self.relative_size <= 1:
            raise ValueError(f"relative size must lie in (0, 1], got {self.relative_size}")


def pareto_front(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Points not dominated in (relative_size, mean_error), ascending by error."""
    pts = list(points)
    if not pts:
        raise ValueError("no points")
    s = np.array([p.relative_size for p in pts])
    e = np.array([p.mean_error for p in pts])
    weakly = (s[None, :] <= s[:, None]) & (e[None, :] <= e[:, None])
    strictly = (s[None, :] < s[:, None]) | (e[None, :] < e[:, None])
    dominated = (weakly & strictly).any(axis=1)
    front = [p for p, dom in zip(pts, dominated) if not dom]
    return sorted(front, key=lambda p: (p.mean_error, p.relative_size, p.combo))
