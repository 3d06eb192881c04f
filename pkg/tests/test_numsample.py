import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confperf.numsample import (NumericStrategySpec, SamplingError, d_optimal, denormalize, k_exchange,
                                load_pbd_seeds, model_matrix, normalize, sample_bbd, sample_cci, sample_dod,
                                sample_numeric, sample_ofat, sample_pbd, sample_random_numeric)
from confperf.rng import Xoshiro256
from confperf.space import NumericOption

from conftest import make_space

FIVE = (1, 2, 3, 4, 5)


def space_k(k, dom=FIVE):
    return make_space(numeric=[(f"n{i}", dom) for i in range(k)])


def points(sample, space):
    return sample.matrix(space.numeric_names)


def test_normalize_examples():
    o = NumericOption("n", tuple(float(v) for v in range(9)))
    assert normalize(o, 4) == 0.5
    assert normalize(o, 0) == 0.0 and normalize(o, 8) == 1.0
    assert denormalize(NumericOption("m", (1.0, 2.0, 4.0, 8.0)), 0.6) == 4.0
    with pytest.raises(ValueError):
        normalize(o, 9)


def test_snap_ties_go_down():
    o = NumericOption("n", (0.0, 2.0, 4.0))
    assert o.snap(1.0) == 0.0 and o.snap(3.0) == 2.0 and o.snap(3.1) == 4.0


def test_ofat():
    s3 = space_k(3)
    X = points(sample_ofat(s3, 5), s3)
    assert len(X) == 13
    centre = np.array([3.0, 3.0, 3.0])
    assert (X == centre).all(axis=1).any()
    assert all(((r != centre).sum() <= 1) for r in X)
    assert len(sample_ofat(space_k(1), 2)) == 2
    s2 = make_space(numeric=[("a", range(11)), ("b", range(11))])
    got = {tuple(r) for r in points(sample_ofat(s2, 3), s2)}
    assert got == {(5, 5), (0, 5), (10, 5), (5, 0), (5, 10)}


def test_bbd():
    s3 = space_k(3)
    X = points(sample_bbd(s3), s3)
    assert len(X) == 13
    mids = X[~(X == 3).all(axis=1)]
    assert all(((r == 3).sum() == 1) for r in mids)  # edge midpoints of the cube
    assert len(sample_bbd(space_k(4))) == 25
    with pytest.raises(SamplingError, match="BBD requires"):
        sample_bbd(space_k(2))
    odd = make_space(numeric=[("a", (0, 1, 7)), ("b", (2, 3)), ("c", (-5, 0, 1, 10))])
    for row in points(sample_bbd(odd), odd):
        assert all(v in o.values for v, o in zip(row, odd.numeric_options))


def test_cci():
    s3 = make_space(numeric=[(f"n{i}", range(9)) for i in range(3)])
    X = points(sample_cci(s3), s3)
    assert len(X) == 15
    s1 = make_space(numeric=[("n", range(9))])
    assert len(sample_cci(s1)) == 5
    sq = make_space(numeric=[("x", np.linspace(0, 1, 9)), ("y", np.linspace(0, 1, 9))])
    got = {tuple(r) for r in points(sample_cci(sq, 0.5), sq)}
    assert {(0.5, 0.0), (0.5, 1.0), (0.0, 0.5), (1.0, 0.5)} <= got
    assert {(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75), (0.5, 0.5)} <= got
    with pytest.raises(SamplingError):
        sample_cci(s3, 1.0)


def test_pbd_seeds_are_balanced():
    for seed in load_pbd_seeds().values():
        D = seed.design()
        assert D.shape == (seed.runs, seed.runs - 1)
        for col in D.T:
            counts = np.bincount(col, minlength=seed.levels)
            assert len(set(counts)) == 1


def test_pbd_examples():
    s3 = make_space(numeric=[(f"n{i}", range(9)) for i in range(3)])
    X = points(sample_pbd(s3, "9x3"), s3)
    assert len(X) == 9
    for col in X.T:
        assert set(col) == {0.0, 4.0, 8.0}
    assert len(sample_pbd(space_k(3), "25x5")) == 25
    with pytest.raises(SamplingError, match="seed too short"):
        sample_pbd(space_k(9), "9x3")


def test_pbd_rows_are_right_shifts():
    seed = load_pbd_seeds()["9x3"]
    D = seed.design()
    for i in range(1, seed.runs - 1):
        assert np.array_equal(D[i], np.roll(D[0], i))


def test_dod_one_dimension_brute_force():
    sp = make_space(numeric=[("u", (0, 0.25, 0.5, 0.75, 1))])
    s = sample_dod(sp, 2, model_terms="linear")
    assert sorted(points(s, sp)[:, 0]) == [0.0, 1.0]


def test_dod_full_candidate_set():
    sp = space_k(1)
    assert len(sample_dod(sp, 5, model_terms="linear")) == 5


def test_dod_deficient():
    with pytest.raises(SamplingError):
        d_optimal(np.ones((6, 2)), 3)


def test_dod_improves_on_its_start():
    rng = np.random.default_rng(5)
    X = model_matrix(rng.random((30, 3)), "quadratic")
    for r in range(5):
        start = Xoshiro256(r).choose(30, 10)
        _, val = k_exchange(X, 10, Xoshiro256(r))
        M = X[start].T @ X[start]
        assert val >= np.linalg.slogdet(M)[1] - 1e-12


def test_random_numeric():
    sp = space_k(2)
    assert len(sample_random_numeric(sp, 25, 3)) == 25
    a, b = sample_random_numeric(sp, 10, 3), sample_random_numeric(sp, 10, 3)
    assert a.to_csv(sp.numeric_names) == b.to_csv(sp.numeric_names)
    with pytest.raises(SamplingError):
        sample_random_numeric(sp, 26, 0)


def test_numeric_constraints_drop_points():
    sp = make_space(numeric=[(f"n{i}", FIVE) for i in range(3)], constraints=["n0 + n1 > 2"])
    with pytest.warns(Warning):
        s = sample_bbd(sp)
    assert len(s) == 12 and s.skipped


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 5), st.sampled_from(["OFAT", "BBD", "CCI", "PBD"]),
       st.lists(st.integers(-3, 12), min_size=2, max_size=5, unique=True))
def test_values_are_domain_members(k, kind, dom):
    sp = space_k(k, tuple(sorted(dom)))
    s = sample_numeric(sp, NumericStrategySpec(kind, seed_id="25x5"))
    X = points(s, sp)
    for j, o in enumerate(sp.numeric_options):
        assert set(X[:, j]) <= set(o.values)
    assert len({tuple(r) for r in X}) == len(X)


def test_size_formulas():
    for k in (3, 4, 5):
        sp = make_space(numeric=[(f"n{i}", range(9)) for i in range(k)])
        assert len(sample_ofat(sp, 5)) == k * 4 + 1
        assert len(sample_bbd(sp)) == 2 * k * (k - 1) + 1
        assert len(sample_cci(sp)) == 2**k + 2 * k + 1


def test_dod_quality_against_brute_force():
    hits = 0
    for inst in range(100):
        rng = np.random.default_rng(inst)
        n = int(rng.integers(6, 13))
        size = int(rng.integers(3, 6))
        X = model_matrix(rng.random((n, 2)), "linear")
        best = max(np.linalg.det(X[list(c)].T @ X[list(c)]) for c in itertools.combinations(range(n), size))
        _, logdet = d_optimal(X, size, restarts=5, seed=inst)
        hits += math.exp(logdet) >= 0.95 * best
    assert hits >= 95
