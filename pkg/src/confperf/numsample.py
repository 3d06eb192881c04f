"""Experimental designs and random sampling for the numeric sub-space.

Designs are laid out in the normalized unit cube and mapped back onto each
option's finite domain by snapping to the nearest member (ties toward the
smaller value). Points violating numeric-only constraints are dropped with a
warning; points that coincide after snapping are merged.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .binsample import SamplingError, SamplingWarning
from .rng import Xoshiro256
from .space import (
    Configuration,
    ConfigurationSpace,
    NumericOption,
    SampleSet,
    dedupe,
    valid_matrix,
)

CCI_CORNER_CAP = 1 << 16
DOD_CANDIDATE_CAP = 20_000


@dataclass(frozen=True)
class NumericStrategySpec:
    kind: str  # OFAT | BBD | CCI | PBD | DOD | RandomNumeric
    levels: int | None = None
    alpha: float | None = None
    seed_id: str | None = None
    size: int | None = None
    restarts: int | None = None
    seed: int | None = None
    model_terms: str | None = None


def normalize(option: NumericOption, value: float) -> float:
    if not option.min <= value <= option.max:
        raise ValueError(f"{value} outside [{option.min}, {option.max}] of {option.name!r}")
    return (value - option.min) / (option.max - option.min)


def denormalize(option: NumericOption, u: float) -> float:
    """Map a unit-interval coordinate back onto the domain, snapping to a member."""
    return option.snap(option.min + u * (option.max - option.min))


def _finish(space: ConfigurationSpace, unit_points, strategy: str, params=None, seed=None,
            requested=None, skipped=()) -> SampleSet:
    sub = space.numeric_subspace()
    opts = sub.numeric_options
    pts = np.asarray(unit_points, dtype=float).reshape(-1, len(opts))
    X = np.array([[denormalize(o, u) for o, u in zip(opts, row)] for row in pts]).reshape(len(pts), len(opts))
    return _from_rows(sub, X, strategy, params, seed, requested, skipped)


def _from_rows(sub, X, strategy, params=None, seed=None, requested=None, skipped=()) -> SampleSet:
    skipped = list(skipped)
    if len(X):
        ok = sub.valid_mask(X)
        if not ok.all():
            msg = f"{int((~ok).sum())} design point(s) violate numeric constraints and were dropped"
            skipped.append(msg)
            warnings.warn(msg, SamplingWarning, stacklevel=3)
        X = X[ok]
    members = tuple(dedupe(sub.config(r) for r in X))
    return SampleSet(members, strategy, params or {}, seed=seed, requested_size=requested, skipped=tuple(skipped))


def _no_numeric(space: ConfigurationSpace, strategy: str) -> SampleSet | None:
    if not space.numeric_options:
        return SampleSet((Configuration(),), strategy)
    return None


def sample_ofat(space: ConfigurationSpace, levels: int = 5) -> SampleSet:
    """Vary one option at a time over ``levels`` equidistant levels around a common base point.

    The base is the middle level (lower middle for even ``levels``), so the
    design has ``k * (levels - 1) + 1`` points before snapping.
    """
    if levels < 2:
        raise SamplingError("OFAT needs at least 2 levels")
    empty = _no_numeric(space, "OFAT")
    if empty:
        return empty
    k = len(space.numeric_options)
    grid = [j / (levels - 1) for j in range(levels)]
    base_level = (levels - 1) // 2
    base = [grid[base_level]] * k
    points = [list(base)]
    for i in range(k):
        for j, u in enumerate(grid):
            if j == base_level:
                continue
            p = list(base)
            p[i] = u
            points.append(p)
    return _finish(space, points, "OFAT", {"levels": levels})


def sample_bbd(space: ConfigurationSpace) -> SampleSet:
    k = len(space.numeric_options)
    if k < 3:
        raise SamplingError("BBD requires >= 3 numeric options")
    points = [[0.5] * k]
    for i, j in itertools.combinations(range(k), 2):
        for a, b in itertools.product((0.0, 1.0), repeat=2):
            p = [0.5] * k
            p[i], p[j] = a, b
            points.append(p)
    return _finish(space, points, "BBD")


def sample_cci(space: ConfigurationSpace, alpha: float = 0.5) -> SampleSet:
    """Central composite inscribed design in the unit cube.

    Axial points sit at ``0.5 +- alpha`` on each axis; the factorial corners
    are scaled to ``0.5 +- alpha / 2`` so the whole design stays inside the
    region spanned by the axial points.
    """
    if not 0 < alpha < 1:
        raise SamplingError("CCI needs 0 < alpha < 1")
    empty = _no_numeric(space, "CCI")
    if empty:
        return empty
    k = len(space.numeric_options)
    if 2**k > CCI_CORNER_CAP:
        raise SamplingError(f"2^{k} factorial corners exceed the cap of {CCI_CORNER_CAP}")
    lo, hi = 0.5 - alpha / 2, 0.5 + alpha / 2
    points = [[0.5] * k]
    points += [list(c) for c in itertools.product((lo, hi), repeat=k)]
    for i in range(k):
        for u in (0.5 - alpha, 0.5 + alpha):
            p = [0.5] * k
            p[i] = min(1.0, max(0.0, u))
            points.append(p)
    return _finish(space, points, "CCI", {"alpha": alpha})


# -- Plackett-Burman ---------------------------------------------------------


@dataclass(frozen=True)
class PbdSeed:
    id: str
    runs: int
    levels: int
    vector: tuple[int, ...]

    def design(self) -> np.ndarray:
        """Cyclic right shifts of the generator plus the all-zero run."""
        g = np.asarray(self.vector, dtype=int)
        rows = [np.roll(g, i) for i in range(len(g))]
        rows.append(np.zeros(len(g), dtype=int))
        return np.array(rows)


def load_pbd_seeds(path: str | Path | None = None) -> dict[str, PbdSeed]:
    if path is None:
        text = resources.files("confperf").joinpath("data/pbd_seeds.json").read_text()
    else:
        text = Path(path).read_text()
    out = {}
    for entry in json.loads(text):
        vec = tuple(int(v) for v in entry["vector"])
        levels = int(entry["levels"])
        if any(not 0 <= v < levels for v in vec):
            raise ValueError(f"PBD seed {entry['id']}: level index out of range")
        seed = PbdSeed(str(entry["id"]), int(entry.get("runs", len(vec) + 1)), levels, vec)
        if seed.runs != len(vec) + 1:
            raise ValueError(f"PBD seed {seed.id}: generator length must be runs - 1")
        out[seed.id] = seed
    return out


def sample_pbd(space: ConfigurationSpace, seed_id: str = "9x3", seeds: dict[str, PbdSeed] | None = None) -> SampleSet:
    seeds = seeds if seeds is not None else load_pbd_seeds()
    seed_id = seed_id.replace(",", "x").strip("()")
    if seed_id not in seeds:
        raise SamplingError(f"unknown PBD seed {seed_id!r}; known: {sorted(seeds)}")
    seed = seeds[seed_id]
    empty = _no_numeric(space, f"PBD({seed.runs},{seed.levels})")
    if empty:
        return empty
    k = len(space.numeric_options)
    if k > len(seed.vector):
        raise SamplingError(f"seed too short: {seed_id} covers {len(seed.vector)} options, space has {k}")
    design = seed.design()[:, :k]
    unit = design / (seed.levels - 1)
    return _finish(space, unit, f"PBD({seed.runs},{seed.levels})", {"seed_id": seed.id})


# -- D-optimal ---------------------------------------------------------------


def model_matrix(unit_points: np.ndarray, terms: str = "quadratic") -> np.ndarray:
    """Model matrix over coded values in [-1, 1].

    ``terms``: ``linear`` (intercept + main effects), ``quadratic`` (plus pure
    squares) or ``interaction`` (quadratic plus pairwise products).
    """
    Z = 2.0 * np.asarray(unit_points, dtype=float) - 1.0
    cols = [np.ones(len(Z))] + [Z[:, j] for j in range(Z.shape[1])]
    if terms in ("quadratic", "interaction"):
        cols += [Z[:, j] ** 2 for j in range(Z.shape[1])]
    if terms == "interaction":
        cols += [Z[:, i] * Z[:, j] for i, j in itertools.combinations(range(Z.shape[1]), 2)]
    elif terms not in ("linear", "quadratic"):
        raise ValueError(f"unknown model terms {terms!r}")
    return np.column_stack(cols)


def _logdet(M: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(M)
    return val if sign > 0 else -np.inf


def k_exchange(X: np.ndarray, size: int, rng: Xoshiro256, max_iter: int = 1000) -> tuple[list[int], float]:
    """Single-point exchange from a random start.

    Selected points are visited in ascending order of leverage; the first one
    with an improving partner is swapped for the candidate maximizing the
    determinant ratio. Stops when no selected point can be improved.
    Returns the selected indices and log det(X_S^T X_S).
    """
    n, p = X.shape
    sel = rng.choose(n, size)
    in_sel = np.zeros(n, dtype=bool)
    in_sel[sel] = True
    M = X[sel].T @ X[sel]
    ridge = 1e-9 * max(1.0, np.trace(M) / p)
    for _ in range(max_iter):
        Minv = np.linalg.inv(M + ridge * np.eye(p))
        XM = X @ Minv
        lev = np.einsum("ij,ij->i", XM, X)
        order = sorted(range(size), key=lambda s: (lev[sel[s]], s))
        swapped = False
        for s in order:
            i = sel[s]
            d_i = lev[i]
            d_ij = XM @ X[i]
            ratio = (1.0 - d_i) * (1.0 + lev) + d_ij**2
            ratio[in_sel] = -np.inf
            j = int(np.argmax(ratio))
            if ratio[j] > 1.0 + 1e-10:
                M = M - np.outer(X[i], X[i]) + np.outer(X[j], X[j])
                sel[s] = j
                in_sel[i], in_sel[j] = False, True
                swapped = True
                break
        if not swapped:
            break
    return sel, _logdet(X[sel].T @ X[sel])


def d_optimal(X: np.ndarray, size: int, restarts: int = 5, seed: int = 0) -> tuple[list[int], float]:
    """Best k-exchange result over seeded restarts; ties go to the earlier restart."""
    if size > len(X):
        raise SamplingError(f"requested {size} points from {len(X)} candidates")
    if size < X.shape[1]:
        raise SamplingError(f"size {size} is smaller than the {X.shape[1]} model-matrix columns")
    best, best_val = None, -np.inf
    for r in range(restarts):
        sel, val = k_exchange(X, size, Xoshiro256(seed * 1_000_003 + r))
        if val > best_val:
            best, best_val = sel, val
    if best is None:
        raise SamplingError("candidate set deficient for model terms (X^T X singular in every restart)")
    return best, best_val


def sample_dod(space: ConfigurationSpace, size: int, model_terms: str = "quadratic", restarts: int = 5,
               seed: int = 0, candidate_cap: int = DOD_CANDIDATE_CAP) -> SampleSet:
    empty = _no_numeric(space, f"DOD({size})")
    if empty:
        return empty
    sub = space.numeric_subspace()
    cand = valid_matrix(sub)
    if len(cand) > candidate_cap:
        keep = sorted(Xoshiro256(seed).choose(len(cand), candidate_cap))
        cand = cand[keep]
    unit = np.column_stack([(cand[:, j] - o.min) / (o.max - o.min) for j, o in enumerate(sub.numeric_options)])
    X = model_matrix(unit, model_terms)
    sel, _ = d_optimal(X, size, restarts, seed)
    rows = cand[sorted(sel)]
    params = {"size": size, "model_terms": model_terms, "restarts": restarts}
    return _from_rows(sub, rows, f"DOD({size})", params, seed=seed, requested=size)


def sample_random_numeric(space: ConfigurationSpace, size: int, seed: int) -> SampleSet:
    empty = _no_numeric(space, f"RN({size})")
    if empty:
        return empty
    sub = space.numeric_subspace()
    cand = valid_matrix(sub)
    if size > len(cand):
        raise SamplingError(f"requested {size} configurations but only {len(cand)} valid numeric configurations exist")
    picked = sorted(Xoshiro256(seed).choose(len(cand), size))
    return _from_rows(sub, cand[picked], f"RN({size})", {"size": size}, seed=seed, requested=size)


def sample_numeric(space: ConfigurationSpace, spec: NumericStrategySpec) -> SampleSet:
    if spec.kind == "OFAT":
        return sample_ofat(space, spec.levels or 5)
    if spec.kind == "BBD":
        return sample_bbd(space)
    if spec.kind == "CCI":
        return sample_cci(space, 0.5 if spec.alpha is None else spec.alpha)
    if spec.kind == "PBD":
        return sample_pbd(space, spec.seed_id or "9x3")
    if spec.kind == "DOD":
        return sample_dod(space, spec.size, spec.model_terms or "quadratic", spec.restarts or 5, spec.seed or 0)
    if spec.kind == "RandomNumeric":
        return sample_random_numeric(space, spec.size, spec.seed or 0)
    raise SamplingError(f"unknown numeric strategy {spec.kind!r}")

