"""Shared learner plumbing: feature encoding, hyper-parameter resolution, the Predictor wrapper."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

import numpy as np

from ..space import ConfigurationSpace, space_from_dict

LEARNER_IDS = ("MR", "CART", "RF", "kNN", "KRR", "SVR")


class LearnerError(ValueError):
    pass


@lru_cache(maxsize=None)
def _hp_table() -> dict:
    return json.loads(resources.files("confperf").joinpath("data/hyperparams.json").read_text())


def hyperparam_table() -> dict:
    """Defaults, fixed extras and search domains per learner (a fresh copy)."""
    return json.loads(json.dumps(_hp_table()))


def default_hyperparams(learner: str) -> dict:
    entry = _hp_table()[_check_learner(learner)]
    return {**entry["defaults"], **entry.get("fixed", {})}


def resolve_hyperparams(learner: str, hp: Mapping | None) -> dict:
    """Defaults overlaid with ``hp``; unknown keys are an error."""
    out = default_hyperparams(learner)
    for key, value in (hp or {}).items():
        if key not in out:
            raise LearnerError(f"unknown hyper-parameter {key!r} for {learner}")
        out[key] = value
    return out


def _check_learner(learner: str) -> str:
    if learner not in LEARNER_IDS:
        raise LearnerError(f"unknown learner {learner!r}; expected one of {', '.join(LEARNER_IDS)}")
    return learner


@dataclass(frozen=True)
class Encoder:
    """Maps raw rows to [0, 1] per column (binary columns pass through unchanged)."""

    low: np.ndarray
    span: np.ndarray

    @classmethod
    def from_space(cls, space: ConfigurationSpace) -> "Encoder":
        lo = [0.0] * len(space.binary_options) + [o.min for o in space.numeric_options]
        hi = [1.0] * len(space.binary_options) + [o.max for o in space.numeric_options]
        lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
        return cls(lo, hi - lo)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.low) / self.span


def encode(space: ConfigurationSpace, config: Mapping[str, float]) -> np.ndarray:
    """Feature vector of ``config`` in declared option order."""
    return Encoder.from_space(space).transform(space.row(config)[None, :])[0]


class Predictor:
    """A trained model bound to its configuration space."""

    def __init__(self, learner: str, space: ConfigurationSpace, hp: Mapping, model):
        self.learner = learner
        self.space = space
        self.hp = dict(hp)
        self.model = model

    def predict_rows(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.space.options):
            raise LearnerError(f"expected rows with {len(self.space.options)} columns, got shape {X.shape}")
        return np.asarray(self.model.predict(X), dtype=float)

    def predict(self, config: Mapping[str, float]) -> float:
        if set(config) != set(self.space.option_names):
            raise LearnerError("configuration does not belong to the predictor's space")
        return float(self.predict_rows(self.space.row(config)[None, :])[0])

    def to_dict(self) -> dict:
        return {"learner": self.learner, "hyperparams": self.hp, "space": self.space.to_dict(),
                "state": self.model.state()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def __repr__(self):
        return f"Predictor({self.learner}, {self.hp})"


def predictor_from_dict(data: Mapping) -> Predictor:
    from . import MODEL_TYPES

    learner = _check_learner(data["learner"])
    space = space_from_dict(data["space"])
    model = MODEL_TYPES[learner].from_state(data["state"])
    return Predictor(learner, space, data["hyperparams"], model)


def load_predictor(text: str) -> Predictor:
    return predictor_from_dict(json.loads(text))
