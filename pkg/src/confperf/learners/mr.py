"""Multiple linear regression over option terms, grown by forward selection.

A term is a product of factors; a factor is one basis function of one option
(``a``, ``n^2``, ``log(n)``) or, with ``functionTypes="complex"``, a ratio of
two numeric options. Each round scores every candidate term (single factors
plus products of already selected terms with a factor of an unused option)
by the validation error of the refitted model, and keeps the best one.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..space import ConfigurationSpace
from .base import LearnerError

MAX_POWER = 4
MAX_TERMS = 64


class Factor(NamedTuple):
    kind: str  # "pow" | "log" | "ratio"
    i: int
    power: int = 1
    j: int = -1

    @property
    def options(self) -> frozenset[int]:
        return frozenset((self.i,) if self.j < 0 else (self.i, self.j))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "pow":
            return X[:, self.i] ** self.power
        if self.kind == "log":
            return np.log(X[:, self.i])
        return X[:, self.i] / X[:, self.j]

    def label(self, names) -> str:
        if self.kind == "pow":
            return names[self.i] if self.power == 1 else f"{names[self.i]}^{self.power}"
        if self.kind == "log":
            return f"log({names[self.i]})"
        return f"{names[self.i]}/{names[self.j]}"

    def to_list(self):
        return [self.kind, self.i, self.power, self.j]


Term = tuple  # sorted tuple of Factor; () is the intercept


def term_options(term: Term) -> frozenset[int]:
    out = frozenset()
    for f in term:
        out |= f.options
    return out


def evaluate_term(term: Term, X: np.ndarray) -> np.ndarray:
    col = np.ones(len(X))
    for f in term:
        col = col * f.evaluate(X)
    return col


def base_factors(space: ConfigurationSpace, function_types: str) -> list[Factor]:
    nb = len(space.binary_options)
    out = [Factor("pow", i) for i in range(nb)]
    for k, opt in enumerate(space.numeric_options):
        i = nb + k
        out += [Factor("pow", i, p) for p in range(1, MAX_POWER + 1)]
        if opt.min > 0:
            out.append(Factor("log", i))
    if function_types == "complex":
        for a in range(len(space.numeric_options)):
            for b in range(len(space.numeric_options)):
                if a != b and space.numeric_options[b].min > 0:
                    out.append(Factor("ratio", nb + a, 1, nb + b))
    elif function_types != "polynomial":
        raise LearnerError(f"functionTypes must be 'polynomial' or 'complex', got {function_types!r}")
    return out


class _TermColumns:
    """Memoised term columns; a product reuses the column of its factor prefix."""

    def __init__(self, X: np.ndarray):
        self.X = X
        self.cache = {(): np.ones(len(X))}

    def __call__(self, term: Term) -> np.ndarray:
        col = self.cache.get(term)
        if col is None:
            col = self(term[:-1]) * term[-1].evaluate(self.X)
            self.cache[term] = col
        return col

    def matrix(self, terms) -> np.ndarray:
        return np.column_stack([self(t) for t in terms])


def _products(term: Term, factors: list[Factor], seen: set) -> list[Term]:
    out = []
    if not term:
        return out
    used = term_options(term)
    for f in factors:
        if f.options & used:
            continue
        t = tuple(sorted(term + (f,)))
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _candidates(selected: list[Term], factors: list[Factor]) -> list[Term]:
    seen = set(selected)
    out = []
    for f in factors:
        t = (f,)
        if t not in seen:
            seen.add(t)
            out.append(t)
    for term in selected:
        out += _products(term, factors, seen)
    return out


def _loss(y, pred, relative: bool) -> float:
    r = np.abs(y - pred)
    return float(np.mean(r / y) if relative else np.mean(r))


def _weighted_fit(A: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(A), axis=0)
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq((A / scale) * w[:, None], y * w, rcond=None)
    return coef / scale


class MultipleRegression:
    def __init__(self, terms, coef, names):
        self.terms = [tuple(t) for t in terms]
        self.coef = np.asarray(coef, dtype=float)
        self.names = list(names)

    def design(self, X) -> np.ndarray:
        return np.column_stack([evaluate_term(t, X) for t in self.terms])

    def predict(self, X) -> np.ndarray:
        return self.design(np.asarray(X, dtype=float)) @ self.coef

    def term_string(self) -> str:
        """Human-readable model, e.g. ``5.0 + 3.0*a + 2.5*a*n1^2``."""
        parts = []
        for t, c in zip(self.terms, self.coef):
            body = "*".join(f.label(self.names) for f in t)
            mag = repr(abs(float(c)))
            piece = f"{mag}*{body}" if body else mag
            if not parts:
                parts.append(piece if c >= 0 else f"-{piece}")
            else:
                parts.append(f"{'+' if c >= 0 else '-'} {piece}")
        return " ".join(parts) if parts else "0.0"

    def state(self) -> dict:
        return {"terms": [[f.to_list() for f in t] for t in self.terms],
                "coef": [float(c) for c in self.coef], "names": self.names,
                "text": self.term_string()}

    @classmethod
    def from_state(cls, s) -> "MultipleRegression":
        terms = [tuple(Factor(k, int(i), int(p), int(j)) for k, i, p, j in t) for t in s["terms"]]
        return cls(terms, s["coef"], s["names"])


def _split(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 80/20 split from a fixed-seed permutation.

    Learning sets are cartesian products, so any stride-based split would keep
    validating the same few numeric points; a shuffled split spreads them.
    """
    idx = np.arange(n)
    if n < 5:
        return idx, idx
    perm = np.random.default_rng(0x5EED).permutation(n)
    n_val = n // 5
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _prune(selected, A, y, tr, va, w, relative, err, min_improvement):
    """Backward pass: drop terms whose removal keeps the validation error within tolerance.

    Forward selection can commit to an early term and then compensate with
    several others; removing the redundant ones restores the sparser model.
    """
    while len(selected) > 1:
        best = None
        for k in range(1, len(selected)):
            keep = np.arange(A.shape[1]) != k
            c = _weighted_fit(A[tr][:, keep], y[tr], w)
            e = _loss(y[va], A[va][:, keep] @ c, relative)
            if best is None or e < best[1]:
                best = (k, e)
        k, e = best
        if e > max(err * (1.0 + min_improvement), 1e-12):
            break
        keep = np.arange(A.shape[1]) != k
        selected = [t for i, t in enumerate(selected) if i != k]
        A = A[:, keep]
        err = min(err, e)
    return selected, A


def _swap_aliases(selected, A, cols, y, tr, va, w, relative, factors, min_improvement, max_rounds=8):
    """Trade a term for an unselected candidate that the learning set cannot tell apart from it.

    Sparse learning sets make some candidate columns exact linear combinations
    of the selected ones. If ``c = sum_i P_i a_i`` on the training rows,
    swapping ``c`` in for term ``j`` keeps the fit and changes the other
    coefficients to ``beta_i - beta_j P_i / P_j``; the swap that zeroes the
    most of them is kept when the resulting model is smaller.
    """
    for _ in range(max_rounds):
        cands = _candidates(selected, factors)
        if not cands or len(selected) < 3:
            break
        C = cols.matrix(cands)
        scale = np.max(np.abs(C[tr]), axis=0)
        ok = np.flatnonzero(np.isfinite(scale) & (scale > 0))
        a_scale = np.max(np.abs(A[tr]), axis=0)
        a_scale[a_scale == 0] = 1.0
        An = A[tr] / a_scale
        Cn = C[tr][:, ok] / scale[ok]
        P, *_ = np.linalg.lstsq(An, Cn, rcond=None)
        resid = np.linalg.norm(Cn - An @ P, axis=0)
        aliased = resid < 1e-8 * np.sqrt(len(tr))
        if not aliased.any():
            break
        P, ok = P[:, aliased], ok[aliased]
        beta = _weighted_fit(An, y[tr], w)
        tol = 1e-8 * np.max(np.abs(beta))
        best = None
        for j in range(1, A.shape[1]):
            usable = np.abs(P[j]) > 1e-8
            if not usable.any():
                continue
            # coefficients of every other term after swapping each candidate in for j
            new = beta[:, None] - beta[j] * P[:, usable] / P[j, usable]
            new[j] = 0.0
            zeros = (np.abs(new) <= tol).sum(axis=0) - 1
            nonzero_c = np.abs(beta[j] / P[j, usable]) > tol
            zeros = np.where(nonzero_c, zeros, zeros + 1)
            k = int(np.argmax(zeros))
            if zeros[k] >= 1 and (best is None or zeros[k] > best[0]):
                best = (int(zeros[k]), j, int(ok[np.flatnonzero(usable)[k]]), new[:, k], bool(nonzero_c[k]))
        if best is None:
            break
        _, j, c, new, keep_c = best
        keep = [i for i in range(A.shape[1]) if i != j and (i == 0 or abs(new[i]) > tol)]
        sel = [selected[i] for i in keep]
        B = A[:, keep]
        if keep_c:
            sel.append(cands[c])
            B = np.column_stack([B, C[:, c]])
        old_c = _weighted_fit(A[tr], y[tr], w)
        old_err = _loss(y[va], A[va] @ old_c, relative)
        new_c = _weighted_fit(B[tr], y[tr], w)
        if _loss(y[va], B[va] @ new_c, relative) > max(old_err * (1.0 + min_improvement), 1e-12):
            break
        selected, A = sel, B
    return selected, A


def fit_mr(space: ConfigurationSpace, X, y, hp) -> MultipleRegression:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise LearnerError("MR needs at least 2 rows")
    loss = hp["lossFunction"]
    if loss not in ("relative", "absolute"):
        raise LearnerError(f"lossFunction must be 'relative' or 'absolute', got {loss!r}")
    min_improvement = float(hp["minImprovement"])
    if min_improvement < 0:
        raise LearnerError("minImprovement must be >= 0")
    relative = loss == "relative"
    factors = base_factors(space, hp["functionTypes"])
    tr, va = _split(len(y))
    w_all = 1.0 / y if relative else np.ones_like(y)
    w = w_all[tr]

    selected: list[Term] = [()]
    A = np.ones((len(y), 1))
    coef = _weighted_fit(A[tr], y[tr], w)
    err = _loss(y[va], A[va] @ coef, relative)
    limit = min(len(tr), MAX_TERMS)
    cols = _TermColumns(X)
    cands = _candidates(selected, factors)
    seen = set(cands) | {()}
    C_raw = cols.matrix(cands)
    while err > 1e-12 and len(selected) < limit:
        if not cands:
            break
        C = C_raw
        scale = np.max(np.abs(C[tr]), axis=0)
        usable = np.isfinite(scale) & (scale > 0)
        scale[~usable] = 1.0
        C = C / scale
        # one projection step per candidate: fit on the current residual orthogonal to A
        Aw = A[tr] * w[:, None]
        a_scale = np.max(np.abs(Aw), axis=0)
        a_scale[a_scale == 0] = 1.0
        Q, R = np.linalg.qr(Aw / a_scale)
        Cw = C[tr] * w[:, None]
        P = np.linalg.solve(R, Q.T @ Cw) / a_scale[:, None]
        perp = Cw - Aw @ P
        norm2 = np.einsum("ij,ij->j", perp, perp)
        base2 = np.einsum("ij,ij->j", Cw, Cw)
        usable &= norm2 > 1e-10 * base2
        resid = (y[tr] - A[tr] @ coef) * w
        beta = np.where(usable, (resid @ perp) / np.where(usable, norm2, 1.0), 0.0)
        pred_va = (A[va] @ coef)[:, None] + (C[va] - A[va] @ P) * beta
        r = np.abs(y[va][:, None] - pred_va)
        scores = (r / y[va][:, None]).mean(axis=0) if relative else r.mean(axis=0)
        scores = np.where(usable & np.isfinite(scores), scores, np.inf)
        best = scores.min()
        if not np.isfinite(best):
            break
        # rounding-level ties go to the earliest (simplest) candidate
        k = int(np.flatnonzero(scores <= best + 1e-12)[0])
        new_sel = selected + [cands[k]]
        new_A = np.column_stack([A, C[:, k] * scale[k]])
        new_coef = _weighted_fit(new_A[tr], y[tr], w)
        new_err = _loss(y[va], new_A[va] @ new_coef, relative)
        if not err > 0 or (err - new_err) / err < min_improvement:
            break
        selected, A, coef, err = new_sel, new_A, new_coef, new_err
        grown = _products(new_sel[-1], factors, seen)
        cands = cands[:k] + cands[k + 1:] + grown
        C_raw = np.delete(C_raw, k, axis=1)
        if grown:
            C_raw = np.hstack([C_raw, cols.matrix(grown)])
    selected, A = _prune(selected, A, y, tr, va, w, relative, err, min_improvement)
    selected, A = _swap_aliases(selected, A, cols, y, tr, va, w, relative, factors, min_improvement)
    coef = _weighted_fit(A, y, w_all)
    return MultipleRegression(selected, coef, space.option_names)
