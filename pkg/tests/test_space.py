import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confperf.constraints import ConstraintSyntaxError
from confperf.space import (Configuration, EnumerationCapError, MeasurementError, MeasurementTable, SpaceError,
                            count_valid, enumerate_valid, is_valid, load_space, parse_space, read_measurements,
                            valid_matrix)

from conftest import brute_force_valid, make_space


def test_parse_counts_options_and_constraints():
    text = """{"binary": ["a", "b", "c"],
               "numeric": [{"name": "n", "values": [1, 2, 4]}, {"name": "m", "min": 0, "max": 8, "step": 2}],
               "constraints": ["a => b", "n + m > 1"]}"""
    space = parse_space(text)
    assert space.binary_names == ("a", "b", "c")
    assert space.numeric_names == ("n", "m")
    assert space.option("m").values == (0.0, 2.0, 4.0, 6.0, 8.0)
    assert len(space.constraints) == 2


def test_one_binary_option_has_two_configurations():
    assert count_valid(parse_space('{"binary": ["a"]}')) == 2


def test_unknown_option_in_constraint():
    with pytest.raises(SpaceError, match="unknown option"):
        parse_space('{"binary": ["a"], "constraints": ["a & foo"]}')


def test_syntax_error_reports_position():
    with pytest.raises(ConstraintSyntaxError) as err:
        parse_space('{"binary": ["a", "b"], "constraints": ["a & & b"]}')
    assert err.value.position == 4


def test_json_syntax_error_reports_line():
    with pytest.raises(SpaceError, match="line 2"):
        parse_space('{"binary": ["a"],\n "numeric": [}')


@pytest.mark.parametrize("bad", [
    '{"binary": ["a", "a"]}',
    '{"binary": ["a"], "numeric": [{"name": "a", "values": [1, 2]}]}',
    '{"numeric": [{"name": "n", "values": []}]}',
    '{"numeric": [{"name": "n", "values": [3]}]}',
    '{"numeric": [{"name": "n", "values": [2, 1]}]}',
    '{}',
])
def test_rejects_malformed_models(bad):
    with pytest.raises(SpaceError):
        parse_space(bad)


def test_round_trip(tmp_path):
    space = make_space("abc", [("n", (1, 2, 3)), ("m", (0.5, 1.5))], ["a => b", "2*n - m >= 1", "!(a & c)"])
    again = parse_space(space.to_json())
    assert again == space
    path = tmp_path / "space.json"
    path.write_text(space.to_json())
    assert load_space(path) == space


def test_hsmgp_style_linear_constraint():
    space = make_space(numeric=[("pre", (0, 1, 2)), ("post", (0, 1, 2))], constraints=["pre + post > 0"])
    assert not is_valid(space, {"pre": 0, "post": 0})
    assert is_valid(space, {"pre": 0, "post": 1})
    assert count_valid(space) == 8


def test_implication_semantics():
    space = make_space("ab", constraints=["a => b"])
    assert not is_valid(space, {"a": 1, "b": 0})
    assert is_valid(space, {"a": 0, "b": 0})


def test_unconstrained_space_accepts_everything():
    space = make_space("ab", [("n", (1, 2))])
    for a, b, n in itertools.product((0, 1), (0, 1), (1, 2)):
        assert is_valid(space, {"a": a, "b": b, "n": n})


def test_partial_assignment_is_an_error():
    space = make_space("ab")
    with pytest.raises(SpaceError):
        is_valid(space, {"a": 1})


def test_enumeration_examples():
    assert count_valid(make_space("ab")) == 4
    one_hot = make_space("abc", constraints=["(a | b | c)", "!(a & b)", "!(a & c)", "!(b & c)"])
    assert [sorted(c.enabled()) for c in enumerate_valid(one_hot)] == [["c"], ["b"], ["a"]]
    assert count_valid(make_space(numeric=[("n", (1, 2, 3, 4, 5))])) == 5
    assert count_valid(make_space("abcd", constraints=["a | b | c | d"])) == 15


def test_enumeration_is_lexicographic():
    space = make_space("ab", [("n", (1, 2))])
    rows = [tuple(space.row(c)) for c in enumerate_valid(space)]
    assert rows == sorted(rows)
    assert rows == [tuple(map(float, r)) for r in itertools.product((0, 1), (0, 1), (1, 2))]


def test_enumeration_cap():
    space = make_space([f"o{i}" for i in range(12)])
    with pytest.raises(EnumerationCapError):
        count_valid(space, cap=1000)
    with pytest.raises(EnumerationCapError):
        list(enumerate_valid(space, cap=1000))


names = st.sampled_from(["a", "b", "c", "d"])
literal = names | names.map(lambda n: f"!{n}")
clause = st.lists(literal, min_size=1, max_size=3).map(lambda xs: "(" + " | ".join(xs) + ")")
linear = st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.sampled_from(["<", "<=", "=", ">=", ">"]),
                   st.integers(-4, 8)).map(
    lambda t: f"{t[0]}*n {'+' if t[1] >= 0 else '-'} {abs(t[1])}*m {t[2]} {t[3]}")
constraint = clause | linear | st.tuples(names, linear).map(lambda t: f"{t[0]} => ({t[1]})")


@settings(max_examples=60, deadline=None)
@given(st.lists(constraint, max_size=4))
def test_enumeration_matches_brute_force(cons):
    space = make_space("abcd", [("n", (0, 1, 2)), ("m", (1, 3))], cons)
    expected = brute_force_valid(space)
    got = [tuple(r) for r in valid_matrix(space)]
    assert got == [tuple(map(float, r)) for r in expected]
    assert count_valid(space) == len(expected)
    assert len(set(got)) == len(got)
    for r in got[:20]:
        assert is_valid(space, space.config(r))


def test_configuration_is_hashable_and_order_free():
    a = Configuration({"x": 1, "y": 2.5})
    b = Configuration([("y", 2.5), ("x", 1.0)])
    assert a == b and hash(a) == hash(b)


def _write(path, text):
    path.write_text(text)
    return path


def test_measurements_ten_rows(tmp_path):
    space = make_space("a", [("n", (1, 2, 3, 4, 5))])
    rows = "\n".join(f"{a},{n},{10 + a + n}" for a in (0, 1) for n in range(1, 6))
    table = read_measurements(_write(tmp_path / "m.csv", "a,n,performance\n" + rows + "\n"), space)
    assert len(table) == 10
    assert table.performance({"a": 1, "n": 3}) == 14.0


def test_measurements_shuffled_columns(tmp_path):
    space = make_space("a", [("n", (1, 2))])
    t1 = read_measurements(_write(tmp_path / "1.csv", "a,n,performance\n0,1,3\n1,2,4\n"), space)
    t2 = read_measurements(_write(tmp_path / "2.csv", "performance,n,a\n3,1,0\n4,2,1\n"), space)
    assert np.array_equal(t1.X, t2.X) and np.array_equal(t1.y, t2.y)


def test_measurement_errors(tmp_path):
    space = make_space("ab", constraints=["a => b"])
    with pytest.raises(MeasurementError, match="line 3"):
        read_measurements(_write(tmp_path / "z.csv", "a,b,performance\n0,0,1\n0,1,0\n"), space)
    with pytest.raises(MeasurementError, match="missing column 'b'"):
        read_measurements(_write(tmp_path / "c.csv", "a,performance\n0,1\n"), space)
    with pytest.raises(MeasurementError, match=r"line\(s\) \[2\]"):
        read_measurements(_write(tmp_path / "v.csv", "a,b,performance\n1,0,1\n"), space)
    with pytest.raises(MeasurementError, match="duplicates"):
        read_measurements(_write(tmp_path / "d.csv", "a,b,performance\n0,0,1\n0,0,2\n"), space)


def test_table_rejects_non_positive_values():
    space = make_space("a")
    with pytest.raises(MeasurementError):
        MeasurementTable(space, [[0.0], [1.0]], [1.0, -2.0])


def test_table_csv_round_trip(tmp_path):
    space = make_space("a", [("n", (0.5, 1.5))])
    table = MeasurementTable(space, valid_matrix(space), [1.0, 2.0, 3.0, 4.0])
    path = _write(tmp_path / "t.csv", table.to_csv())
    again = read_measurements(path, space)
    assert np.array_equal(again.X, table.X) and np.array_equal(again.y, table.y)
