"""k-nearest-neighbour regression by brute-force Minkowski search on encoded rows."""

from __future__ import annotations

import numpy as np

from .base import Encoder, LearnerError

CHUNK = 256


class KnnModel:
    def __init__(self, encoder: Encoder, train_X, train_y, k: int, weights: str, p: float):
        self.encoder = encoder
        self.train_X = np.asarray(train_X, dtype=float)  # encoded
        self.train_y = np.asarray(train_y, dtype=float)
        self.k = int(k)
        self.weights = weights
        self.p = float(p)

    def _distances(self, Z):
        diff = np.abs(Z[:, None, :] - self.train_X[None, :, :])
        if self.p == 1:
            return diff.sum(axis=2)
        if self.p == 2:
            return np.sqrt((diff * diff).sum(axis=2))
        return (diff ** self.p).sum(axis=2) ** (1.0 / self.p)

    def predict(self, X):
        Z = self.encoder.transform(X)
        out = np.empty(len(Z))
        for s in range(0, len(Z), CHUNK):
            D = self._distances(Z[s:s + CHUNK])
            # stable sort: equal distances resolved by training-row order
            nn = np.argsort(D, axis=1, kind="stable")[:, :self.k]
            d = np.take_along_axis(D, nn, axis=1)
            lab = self.train_y[nn]
            if self.weights == "uniform":
                out[s:s + CHUNK] = lab.mean(axis=1)
                continue
            zero = d == 0
            with np.errstate(divide="ignore"):
                w = np.where(zero, 0.0, 1.0 / d)
            exact = zero.any(axis=1)
            w[exact] = zero[exact].astype(float)
            out[s:s + CHUNK] = (w * lab).sum(axis=1) / w.sum(axis=1)
        return out

    def state(self):
        return {"low": self.encoder.low.tolist(), "span": self.encoder.span.tolist(),
                "X": self.train_X.tolist(), "y": self.train_y.tolist(),
                "k": self.k, "weights": self.weights, "p": self.p}

    @classmethod
    def from_state(cls, s):
        enc = Encoder(np.array(s["low"]), np.array(s["span"]))
        return cls(enc, s["X"], s["y"], s["k"], s["weights"], s["p"])


def fit_knn(space, X, y, hp) -> KnnModel:
    k = int(hp["n_neighbors"])
    if k < 1:
        raise LearnerError("n_neighbors must be >= 1")
    if k > len(y):
        raise LearnerError(f"n_neighbors={k} exceeds the {len(y)} training rows")
    if hp["weights"] not in ("uniform", "distance"):
        raise LearnerError(f"weights must be 'uniform' or 'distance', got {hp['weights']!r}")
    if not float(hp["p"]) >= 1:
        raise LearnerError("Minkowski p must be >= 1")
    # hp["algorithm"] only picks a search structure; brute force gives the same neighbours
    enc = Encoder.from_space(space)
    return KnnModel(enc, enc.transform(X), y, k, hp["weights"], hp["p"])
