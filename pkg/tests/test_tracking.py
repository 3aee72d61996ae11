import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from pfsensor.grid import StructuredGrid, ZoneMask, empty_mask
from pfsensor.markov import MarkovMatrix, MatrixFormatError
from pfsensor.tracking import (
    BinaryTrackingMatrix,
    ConstraintSet,
    SensorSpec,
    TrackingMatrix,
    apply_constraints,
    load_binary,
    load_tracking,
    save_binary,
    save_tracking,
    threshold,
    tracking_matrix,
    volumetric_scale,
)


def operator_from_dense(dense, dt=1.0):
    return MarkovMatrix(matrix=sparse.csr_array(np.asarray(dense, dtype=float)), dt=dt)


def random_stochastic(rng, n):
    m = rng.random((n, n))
    m /= m.sum(axis=1, keepdims=True)
    return operator_from_dense(m)


def full_binary(n):
    return BinaryTrackingMatrix(matrix=sparse.csr_array(np.ones((n, n), dtype=bool)))


def line_grid(n):
    return StructuredGrid((n, 1, 1), (1.0, 1.0, 1.0))


TWO_STATE = [[0.9, 0.1], [0.1, 0.9]]


def test_tracking_zero_steps_is_identity():
    q = tracking_matrix(operator_from_dense(TWO_STATE), 0)
    assert np.allclose(q.matrix.toarray(), np.eye(2))
    assert q.horizon_steps == 0


def test_tracking_identity_powers():
    q = tracking_matrix(operator_from_dense(np.eye(3)), 3)
    assert np.allclose(q.matrix.toarray(), 4.0 * np.eye(3))


def test_tracking_two_state_hand_value():
    # P^2 = [[0.82, 0.18], [0.18, 0.82]]; Q = I + P + P^2
    q = tracking_matrix(operator_from_dense(TWO_STATE), 2)
    assert np.allclose(q.matrix.toarray(), [[2.72, 0.28], [0.28, 2.72]], atol=1e-12)
    assert q.horizon_time == pytest.approx(2.0)


def test_tracking_rejects_negative_steps():
    with pytest.raises(ValueError):
        tracking_matrix(operator_from_dense(TWO_STATE), -1)


@given(seed=st.integers(0, 2**31 - 1), steps=st.sampled_from([0, 1, 5, 20]))
@settings(max_examples=30, deadline=None)
def test_tracking_row_sums_equal_steps_plus_one(seed, steps):
    rng = np.random.default_rng(seed)
    q = tracking_matrix(random_stochastic(rng, 7), steps)
    sums = np.asarray(q.matrix.sum(axis=1)).ravel()
    assert np.allclose(sums, steps + 1.0, atol=1e-9)


def test_tracking_matches_dense_power_sum():
    # the accumulation switches to dense arrays once powers saturate; both
    # regimes must agree with a from-scratch matrix-power sum
    rng = np.random.default_rng(17)
    op = random_stochastic(rng, 15)
    dense_p = op.matrix.toarray()
    for m in (0, 1, 4, 12):
        expected = np.zeros_like(dense_p)
        acc = np.eye(15)
        for _ in range(m + 1):
            expected += acc
            acc = acc @ dense_p
        q = tracking_matrix(op, m)
        assert np.allclose(q.matrix.toarray(), expected, atol=1e-12)


def test_tracking_entry_bounds():
    rng = np.random.default_rng(42)
    steps = 6
    q = tracking_matrix(random_stochastic(rng, 5), steps)
    dense = q.matrix.toarray()
    assert dense.min() >= 0.0
    assert dense.max() <= steps + 1.0
    assert np.all(np.diag(dense) >= 1.0)  # identity term


def test_threshold_zero_keeps_all_stored_entries():
    q = tracking_matrix(operator_from_dense(TWO_STATE), 2)
    b = threshold(q, SensorSpec(0.0))
    assert b.pairs() == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_threshold_one_keeps_only_isolated_states():
    # only a state retaining all mass reaches m + 1
    p = operator_from_dense([[1.0, 0.0], [0.5, 0.5]])
    q = tracking_matrix(p, 3)
    b = threshold(q, SensorSpec(1.0))
    assert b.pairs() == {(0, 0)}


def test_threshold_two_state_hand_values():
    q = tracking_matrix(operator_from_dense(TWO_STATE), 2)
    # cutoff 0.05 * 3 = 0.15 keeps 0.28 and 2.72
    assert len(threshold(q, SensorSpec(0.05)).pairs()) == 4
    # cutoff 0.1 * 3 = 0.3 drops the 0.28 off-diagonals
    assert threshold(q, SensorSpec(0.1)).pairs() == {(0, 0), (1, 1)}


def test_threshold_raw_mode_compares_entries_directly():
    q = tracking_matrix(operator_from_dense(TWO_STATE), 2)
    assert len(threshold(q, SensorSpec(0.28), raw=True).pairs()) == 4
    assert threshold(q, SensorSpec(0.29), raw=True).pairs() == {(0, 0), (1, 1)}


@given(
    seed=st.integers(0, 2**31 - 1),
    eps_lo=st.floats(0.0, 0.5),
    eps_hi=st.floats(0.5, 1.0),
)
@settings(max_examples=30, deadline=None)
def test_threshold_monotone_in_epsilon(seed, eps_lo, eps_hi):
    rng = np.random.default_rng(seed)
    q = tracking_matrix(random_stochastic(rng, 6), 3)
    low = threshold(q, SensorSpec(eps_lo)).pairs()
    high = threshold(q, SensorSpec(eps_hi)).pairs()
    assert high <= low


def test_sensor_spec_bounds():
    with pytest.raises(ValueError):
        SensorSpec(-0.1)
    with pytest.raises(ValueError):
        SensorSpec(1.1)


def test_constraints_empty_masks_are_noop():
    g = line_grid(3)
    b = full_binary(3)
    cs = ConstraintSet(empty_mask(g), empty_mask(g))
    assert apply_constraints(b, cs).pairs() == b.pairs()


def test_constraints_all_forbidden_empties_matrix():
    g = line_grid(3)
    cs = ConstraintSet(empty_mask(g).complement(), empty_mask(g))
    assert apply_constraints(full_binary(3), cs).pairs() == set()


def test_constraints_enumerated_pairs():
    g = line_grid(3)
    cs = ConstraintSet(
        forbidden_locations=ZoneMask(g, frozenset({1})),
        sensing_ignore=ZoneMask(g, frozenset({2})),
    )
    out = apply_constraints(full_binary(3), cs)
    assert out.pairs() == {(0, 0), (0, 2), (1, 0), (1, 2)}


def test_constraints_idempotent_and_commuting():
    g = line_grid(4)
    rng = np.random.default_rng(5)
    dense = rng.random((4, 4)) > 0.4
    b = BinaryTrackingMatrix(matrix=sparse.csr_array(dense))
    cs = ConstraintSet(
        forbidden_locations=ZoneMask(g, frozenset({0, 2})),
        sensing_ignore=ZoneMask(g, frozenset({3})),
    )
    once = apply_constraints(b, cs)
    twice = apply_constraints(once, cs)
    assert once.pairs() == twice.pairs()
    cols_only = ConstraintSet(ZoneMask(g, frozenset({0, 2})), empty_mask(g))
    rows_only = ConstraintSet(empty_mask(g), ZoneMask(g, frozenset({3})))
    assert (
        apply_constraints(apply_constraints(b, cols_only), rows_only).pairs()
        == apply_constraints(apply_constraints(b, rows_only), cols_only).pairs()
    )


def test_constraint_masks_must_share_grid():
    with pytest.raises(ValueError):
        ConstraintSet(empty_mask(line_grid(3)), empty_mask(line_grid(4)))


def test_volumetric_scale_uniform_grid():
    g = line_grid(4)
    scaled = volumetric_scale(full_binary(4), g)
    assert np.allclose(scaled.matrix.toarray(), np.full((4, 4), 0.25))


def test_volumetric_scale_empty_matrix():
    g = line_grid(3)
    empty = BinaryTrackingMatrix(matrix=sparse.csr_array((3, 3), dtype=bool))
    assert volumetric_scale(empty, g).matrix.nnz == 0


def test_volumetric_scale_full_matrix_column_sums_are_one():
    g = line_grid(6)
    scaled = volumetric_scale(full_binary(6), g)
    assert np.allclose(np.asarray(scaled.matrix.sum(axis=0)).ravel(), 1.0)


def test_volumetric_scale_exit_state_has_zero_volume():
    g = line_grid(3)
    scaled = volumetric_scale(full_binary(4), g)  # one extra absorbing state
    dense = scaled.matrix.toarray()
    assert np.allclose(dense[:3], 1.0 / 3.0)
    assert not dense[3].any()


def test_volumetric_scale_grid_size_mismatch():
    with pytest.raises(ValueError):
        volumetric_scale(full_binary(5), line_grid(3))


def test_tracking_round_trip(tmp_path):
    q = tracking_matrix(operator_from_dense(TWO_STATE), 2)
    path = tmp_path / "q.txt"
    save_tracking(path, q)
    back = load_tracking(path)
    assert back.horizon_steps == 2 and back.dt == 1.0
    assert np.array_equal(back.matrix.toarray(), q.matrix.toarray())


def test_binary_round_trip(tmp_path):
    b = threshold(tracking_matrix(operator_from_dense(TWO_STATE), 2), SensorSpec(0.1))
    path = tmp_path / "b.txt"
    save_binary(path, b)
    assert load_binary(path).pairs() == b.pairs()


def test_tracking_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "q.txt"
    path.write_text("# pfsensor-markov v1\n2 0 1.0\n")
    with pytest.raises(MatrixFormatError):
        load_tracking(path)
