"""Tests for verdict semantics and serialization."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pitmanlab.errors import ShapeError
from pitmanlab.verdict import CSV_HEADER, InequalityVerdict, decide, oriented_slack

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(0.0, 1e3, allow_nan=False)


class TestSlack:
    def test_orientation(self):
        assert oriented_slack(3.0, 1.0, ">=") == 2.0
        assert oriented_slack(3.0, 1.0, "<=") == -2.0
        assert oriented_slack(3.0, 1.0, "==") == 2.0

    def test_matrix_min_eigenvalue(self):
        a = np.diag([2.0, 1.0])
        b = np.diag([1.0, 1.5])
        assert oriented_slack(a, b, ">=") == pytest.approx(-0.5)
        assert oriented_slack(a, b, "<=") == pytest.approx(-1.0)

    def test_matrix_equality_largest_magnitude(self):
        assert oriented_slack(np.diag([1.0, 0.0]), np.diag([0.0, 3.0]), "==") == pytest.approx(-3.0)

    def test_non_square(self):
        with pytest.raises(ShapeError):
            oriented_slack(np.zeros((2, 3)), np.zeros((2, 3)), ">=")


class TestDecide:
    @given(finite, positive, st.floats(1e-12, 1e-3))
    def test_inequality_rule(self, slack, u, tol):
        status = decide(slack, u, tol, "inequality")
        assert (status == "pass") == (slack >= -max(tol, 3 * u))
        assert status in ("pass", "fail")

    @given(finite, positive, st.floats(1e-12, 1e-3))
    def test_strict_rule(self, slack, u, tol):
        status = decide(slack, u, tol, "strict")
        if slack > max(tol, 3 * u):
            assert status == "pass"
        elif u > 0 and abs(slack) < 3 * u:
            assert status == "indeterminate"
        else:
            assert status == "fail"

    @given(finite, positive, st.floats(1e-12, 1e-3))
    def test_equality_rule(self, slack, u, tol):
        assert (decide(slack, u, tol, "equality") == "pass") == (abs(slack) <= max(tol, 3 * u))

    @given(finite, positive)
    def test_probe_is_informational(self, slack, u):
        assert decide(slack, u, 1e-10, "probe") == "indeterminate"

    def test_exact_paths_never_indeterminate(self):
        for kind in ("inequality", "strict", "equality"):
            for s in (-1.0, -1e-11, 0.0, 1e-11, 1.0):
                assert decide(s, 0.0, 1e-10, kind) != "indeterminate"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            decide(0.0, 0.0, 1e-10, "maybe")


class TestVerdict:
    def test_build(self):
        v = InequalityVerdict.build("x", {"a": 1}, 2.0, 1.0)
        assert v.status == "pass" and v.passed
        assert v.slack == 1.0 and v.uncertainty == 0.0

    def test_mc_verdict_records_gap_to_noise(self):
        v = InequalityVerdict.build("x", {}, 1.0, 0.9, uncertainty=0.05)
        assert v.detail["gap_to_noise"] == pytest.approx(2.0)

    def test_unknown_relation(self):
        with pytest.raises(ValueError):
            InequalityVerdict.build("x", {}, 1.0, 1.0, relation=">")

    def test_hash_ignores_key_order(self):
        a = InequalityVerdict.build("x", {"a": 1, "b": [1, 2]}, 1.0, 1.0)
        b = InequalityVerdict.build("x", {"b": [1, 2], "a": 1}, 1.0, 1.0)
        assert a.instance_hash == b.instance_hash
        assert len(a.instance_hash) == 16

    def test_csv_row(self):
        v = InequalityVerdict.build("x", {}, np.eye(2), np.zeros((2, 2)))
        row = v.csv_row()
        assert len(row) == len(CSV_HEADER)
        assert row[2] == "[[1.0,0.0],[0.0,1.0]]"
        assert row[-1] == "pass"

    def test_json(self):
        v = InequalityVerdict.build("x", {"n": np.int64(3)}, np.float64(1.0), 0.5, extra=np.arange(2))
        doc = json.loads(json.dumps(v.to_json()))
        assert doc["instance"] == {"n": 3}
        assert doc["detail"]["extra"] == [0, 1]
        assert doc["status"] == "pass"
