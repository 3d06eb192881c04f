"""Sampling strategies for the binary sub-space.

All coverage strategies search the enumerated valid binary configurations
exactly; ties between equally small (or large) candidates go to the first
configuration in enumeration order. Only constraints whose atoms are all
binary options are checked here; mixed constraints are applied when binary
and numeric samples are combined.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .rng import Xoshiro256
from .space import Configuration, ConfigurationSpace, SampleSet, dedupe, valid_matrix


class SamplingWarning(UserWarning):
    pass


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class BinaryStrategySpec:
    kind: str  # "OW" | "NegOW" | "TWise" | "RandomBinary"
    t: int | None = None
    size: int | None = None
    seed: int | None = None


def _binary_configs(space: ConfigurationSpace) -> tuple[ConfigurationSpace, np.ndarray]:
    sub = space.binary_subspace()
    return sub, valid_matrix(sub).astype(np.int8)


def _members(sub: ConfigurationSpace, rows) -> tuple[Configuration, ...]:
    return tuple(dedupe(sub.config(r) for r in rows))


def _warn(msg: str, skipped: list[str]):
    skipped.append(msg)
    warnings.warn(msg, SamplingWarning, stacklevel=3)


def sample_ow(space: ConfigurationSpace) -> SampleSet:
    """One configuration per option: the option on, as few others as possible."""
    sub, V = _binary_configs(space)
    names = sub.binary_names
    size = V.sum(axis=1)
    rows, skipped = [], []
    for j, name in enumerate(names):
        hits = np.flatnonzero(V[:, j] == 1)
        if len(hits) == 0:
            _warn(f"dead option {name!r}: no valid configuration enables it", skipped)
            continue
        rows.append(V[hits[np.argmin(size[hits])]])
    return SampleSet(_members(sub, rows), "OW", skipped=tuple(skipped))


def sample_negow(space: ConfigurationSpace) -> SampleSet:
    """One configuration per option: the option off, as many others as possible; plus all-enabled."""
    sub, V = _binary_configs(space)
    names = sub.binary_names
    size = V.sum(axis=1)
    rows, skipped = [], []
    for j, name in enumerate(names):
        hits = np.flatnonzero(V[:, j] == 0)
        if len(hits) == 0:
            _warn(f"mandatory option {name!r} cannot be disabled", skipped)
            continue
        rows.append(V[hits[np.argmax(size[hits])]])
    full = np.flatnonzero(size == len(names))
    if len(full):
        rows.append(V[full[0]])
    elif len(V):
        _warn("all-enabled configuration is invalid; using a maximal valid configuration", skipped)
        rows.append(V[int(np.argmax(size))])
    return SampleSet(_members(sub, rows), "NegOW", skipped=tuple(skipped))


def sample_twise(space: ConfigurationSpace, t: int) -> SampleSet:
    """One configuration per t-combination of options, enabling it with fewest extras."""
    sub, V = _binary_configs(space)
    names = sub.binary_names
    if not 2 <= t <= len(names):
        raise SamplingError(f"t must satisfy 2 <= t <= {len(names)}, got {t}")
    size = V.sum(axis=1)
    rows, skipped = [], []
    for combo in itertools.combinations(range(len(names)), t):
        hits = np.flatnonzero(V[:, list(combo)].all(axis=1))
        if len(hits) == 0:
            _warn(f"unsatisfiable tuple {tuple(names[i] for i in combo)}", skipped)
            continue
        rows.append(V[hits[np.argmin(size[hits])]])
    return SampleSet(_members(sub, rows), f"T{t}", {"t": t}, skipped=tuple(skipped))


def sample_random_binary(space: ConfigurationSpace, size: int, seed: int) -> SampleSet:
    sub, V = _binary_configs(space)
    if size > len(V):
        raise SamplingError(f"requested {size} configurations but only {len(V)} valid binary configurations exist")
    picked = sorted(Xoshiro256(seed).choose(len(V), size))
    return SampleSet(_members(sub, V[picked]), "RB", {"size": size}, seed=seed, requested_size=size)


def sample_binary(space: ConfigurationSpace, spec: BinaryStrategySpec) -> SampleSet:
    if not space.binary_options:
        return SampleSet((Configuration(),), spec.kind)
    if spec.kind == "OW":
        return sample_ow(space)
    if spec.kind == "NegOW":
        return sample_negow(space)
    if spec.kind == "TWise":
        return sample_twise(space, spec.t)
    if spec.kind == "RandomBinary":
        return sample_random_binary(space, spec.size, spec.seed)
    raise SamplingError(f"unknown binary strategy {spec.kind!r}")
