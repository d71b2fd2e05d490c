import numpy as np
import pytest

from satmimo import InfeasibleError, brute_force_assignment, max_weight_assignment
from satmimo.assignment import assignment_value


class TestMaxWeightAssignment:
    def test_diagonal_dominant(self):
        w = np.eye(3) * 0.9 + 0.05
        np.testing.assert_array_equal(max_weight_assignment(w), [0, 1, 2])

    def test_two_by_two_counterintuitive(self):
        # greedy would grab 0.9 first and end at 0.9 + 0.2 = 1.1; the optimum
        # here is also 1.1 but the cross pairing gives only 0.1 + 0.8
        w = np.array([[0.9, 0.1], [0.8, 0.2]])
        pi = max_weight_assignment(w)
        np.testing.assert_array_equal(pi, [0, 1])
        assert assignment_value(w, pi) == pytest.approx(1.1)

    def test_all_equal_weights_value(self):
        w = np.full((3, 5), 0.7)
        pi = max_weight_assignment(w)
        assert len(set(pi)) == 3
        assert assignment_value(w, pi) == pytest.approx(2.1)
        # deterministic tie-break: lexicographically smallest mapping
        np.testing.assert_array_equal(pi, [0, 1, 2])

    def test_rectangular_uses_best_columns(self):
        w = np.array([[0.0, 0.0, 1.0, 0.0],
                      [0.0, 1.0, 0.0, 0.0]])
        np.testing.assert_array_equal(max_weight_assignment(w), [2, 1])

    def test_infeasible_when_more_streams_than_sats(self):
        with pytest.raises(InfeasibleError):
            max_weight_assignment(np.ones((3, 2)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            max_weight_assignment(np.array([[1.0, np.inf]]))

    def test_matches_brute_force_on_500_instances(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            s = int(rng.integers(1, 7))
            l = int(rng.integers(s, 7))
            w = rng.uniform(0, 1, size=(s, l))
            fast = max_weight_assignment(w)
            slow = brute_force_assignment(w)
            assert assignment_value(w, fast) == pytest.approx(
                assignment_value(w, slow), rel=1e-12)

    def test_column_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        w = rng.uniform(0, 1, size=(3, 5))
        perm = rng.permutation(5)
        pi = max_weight_assignment(w)
        pi_p = max_weight_assignment(w[:, perm])
        assert assignment_value(w, pi) == pytest.approx(
            assignment_value(w[:, perm], pi_p), rel=1e-12)

    def test_scaling_leaves_mapping_unchanged(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            w = rng.uniform(0, 1, size=(3, 4))
            np.testing.assert_array_equal(max_weight_assignment(w),
                                          max_weight_assignment(3.7 * w))


class TestBruteForce:
    def test_single_pair(self):
        np.testing.assert_array_equal(brute_force_assignment([[2.0]]), [0])

    def test_antidiagonal_dominant(self):
        w = np.array([[0.0, 0.1, 0.9],
                      [0.1, 0.9, 0.0],
                      [0.9, 0.0, 0.1]])
        np.testing.assert_array_equal(brute_force_assignment(w), [2, 1, 0])

    def test_size_guard(self):
        with pytest.raises(ValueError):
            brute_force_assignment(np.ones((2, 9)))
