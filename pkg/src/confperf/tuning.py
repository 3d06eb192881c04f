"""Seeded random search over hyper-parameters, scored by k-fold cross-validation."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .evaluation import mean_relative_error
from .learners import LearnerError, hyperparam_table, train
from .learners.base import _check_learner


@dataclass(frozen=True)
class TrialResult:
    index: int
    hp: dict
    cv_error: float
    fold_errors: tuple
    error: str = ""


def load_hyperparam_space(path=None) -> dict:
    """Per-learner ``{"defaults", "space", "fixed"}``; bundled table unless ``path`` is given."""
    if path is None:
        return hyperparam_table()
    with open(path) as fh:
        return json.load(fh)


def check_hyperparam_space(entry: Mapping) -> None:
    defaults, space = entry["defaults"], entry["space"]
    if set(defaults) != set(space):
        raise ValueError(f"defaults and search space keys differ: {sorted(set(defaults) ^ set(space))}")
    for key, dom in space.items():
        v = defaults[key]
        kind = dom["type"]
        if kind == "choice":
            ok = v in dom["values"]
        elif kind in ("int", "uniform", "loguniform"):
            ok = dom["low"] <= v <= dom["high"]
        else:
            raise ValueError(f"unknown domain type {kind!r} for {key}")
        if not ok:
            raise ValueError(f"default {key}={v!r} outside its domain")


def _draw(dom: Mapping, rng: np.random.Generator):
    kind = dom["type"]
    if kind == "choice":
        return dom["values"][int(rng.integers(len(dom["values"])))]
    if kind == "int":
        return int(rng.integers(dom["low"], dom["high"] + 1))
    if kind == "uniform":
        return float(rng.uniform(dom["low"], dom["high"]))
    if kind == "loguniform":
        return float(math.exp(rng.uniform(math.log(dom["low"]), math.log(dom["high"]))))
    raise ValueError(f"unknown domain type {kind!r}")


def draw_trials(entry: Mapping, budget: int, seed: int) -> list[dict]:
    """Trial 0 is the defaults; later trials draw each key in declared order.

    The stream for trial ``i`` does not depend on ``budget``, so a larger budget
    only appends trials.
    """
    rng = np.random.default_rng([seed, 0])
    fixed = entry.get("fixed", {})
    trials = [{**entry["defaults"], **fixed}]
    for _ in range(budget - 1):
        trials.append({**{k: _draw(d, rng) for k, d in entry["space"].items()}, **fixed})
    return trials


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle split into ``folds`` near-equal parts."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"{n} rows cannot fill {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def kfold_error(learner: str, space, X, y, hp: Mapping | None = None, folds: int = 5, seed: int = 0,
                return_folds: bool = False):
    """Mean over folds of the held-out mean relative error."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = kfold_indices(len(y), folds, seed)
    errs = []
    for part in parts:
        if len(part) == 0:
            raise ValueError("empty fold")
        mask = np.ones(len(y), dtype=bool)
        mask[part] = False
        model = train(learner, space, X[mask], y[mask], hp)
        pred = model.predict_rows(X[part])
        if not np.all(np.isfinite(pred)):
            raise LearnerError("non-finite predictions")
        errs.append(mean_relative_error(y[part], pred))
    mean = float(np.mean(errs))
    return (mean, errs) if return_folds else mean


def random_search(learner: str, space, X, y, hp_space: Mapping | None = None, folds: int = 5,
                  budget: int = 100, seed: int = 0) -> tuple[dict, list[TrialResult]]:
    """Best hyper-parameters by CV error (earliest trial wins ties) and the full trial log."""
    _check_learner(learner)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    entry = (hp_space or load_hyperparam_space())[learner]
    check_hyperparam_space(entry)
    split_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    log = []
    for i, hp in enumerate(draw_trials(entry, budget, seed)):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                with np.errstate(all="ignore"):
                    mean, errs = kfold_error(learner, space, X, y, hp, folds, split_seed, return_folds=True)
            if not math.isfinite(mean):
                raise LearnerError("non-finite CV error")
            log.append(TrialResult(i, hp, mean, tuple(errs)))
        except (LearnerError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.append(TrialResult(i, hp, math.inf, (), f"{type(exc).__name__}: {exc}"))
    best = min(log, key=lambda t: (t.cv_error, t.index))
    return dict(best.hp), log


def trials_to_csv(log) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["trial", "params", "fold_errors", "mean", "error"])
    for t in log:
        w.writerow([t.index, json.dumps(t.hp, sort_keys=True), json.dumps([float(e) for e in t.fold_errors]),
                    repr(float(t.cv_error)), t.error])
    return out.getvalue()
