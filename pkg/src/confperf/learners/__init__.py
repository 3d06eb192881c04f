"""Six regression learners behind one ``train`` / ``predict`` contract."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..space import ConfigurationSpace
from .base import (LEARNER_IDS, Encoder, LearnerError, Predictor, default_hyperparams, encode,
                   hyperparam_table, load_predictor, predictor_from_dict, resolve_hyperparams)
from .kernels import ConvergenceWarning, KernelModel, fit_krr, fit_svr, kernel_matrix
from .mr import MultipleRegression, fit_mr
from .neighbors import KnnModel, fit_knn
from .trees import CartModel, ForestModel, RegressionTree, fit_cart, fit_rf, grow_tree

MODEL_TYPES = {"MR": MultipleRegression, "CART": CartModel, "RF": ForestModel,
               "kNN": KnnModel, "KRR": KernelModel, "SVR": KernelModel}
_FIT = {"MR": fit_mr, "CART": fit_cart, "RF": fit_rf, "kNN": fit_knn, "KRR": fit_krr, "SVR": fit_svr}


def train(learner: str, space: ConfigurationSpace, X, y, hp: Mapping | None = None) -> Predictor:
    """Fit ``learner`` on raw rows ``X`` (declared option order) and labels ``y``."""
    hp = resolve_hyperparams(learner, hp)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(space.options) or len(X) != len(y):
        raise LearnerError(f"training data shape {X.shape} / {y.shape} does not fit the space")
    if len(y) == 0:
        raise LearnerError("empty training set")
    return Predictor(learner, space, hp, _FIT[learner](space, X, y, hp))


def predict(predictor: Predictor, config) -> float:
    return predictor.predict(config)


__all__ = [
    "LEARNER_IDS", "Encoder", "LearnerError", "Predictor", "ConvergenceWarning", "train", "predict",
    "encode", "default_hyperparams", "resolve_hyperparams", "hyperparam_table", "load_predictor",
    "predictor_from_dict", "MultipleRegression", "RegressionTree", "CartModel", "ForestModel",
    "KnnModel", "KernelModel", "grow_tree", "kernel_matrix", "fit_mr", "fit_cart", "fit_rf",
    "fit_knn", "fit_krr", "fit_svr",
]
