import numpy as np
import pytest

from iflt import (
    Ensemble,
    InvalidInput,
    QOperatorSpec,
    SignalSequence,
    TrainingSet,
    apply_q,
    center,
    distinctness_check,
    energy,
    est_cov,
)
from conftest import make_ensemble


def seq_of(*arrays, centered=True):
    items = [center(Ensemble(np.asarray(a, dtype=float))) if centered
             else Ensemble(np.asarray(a, dtype=float)) for a in arrays]
    return SignalSequence(tuple(items))


def test_ensemble_validation():
    with pytest.raises(InvalidInput):
        Ensemble(np.zeros((3, 1)))  # single realization
    with pytest.raises(InvalidInput):
        Ensemble(np.array([[1.0, np.inf]]))
    with pytest.raises(InvalidInput):
        Ensemble(np.array([1.0, 2.0]))  # 1-D
    with pytest.raises(InvalidInput):
        Ensemble(np.array([[5.0, 6.0]]), centered=True)  # false claim


def test_center_zero_rows_unchanged():
    e = Ensemble(np.zeros((2, 4)))
    out = center(e)
    assert np.array_equal(out.data, e.data)
    assert out.centered


def test_center_subtracts_row_mean():
    out = center(Ensemble(np.array([[1.0, 3.0]])))
    assert np.array_equal(out.data, np.array([[-1.0, 1.0]]))


def test_center_random_rows(rng):
    out = center(Ensemble(rng.normal(loc=3.0, size=(3, 5))))
    assert np.all(np.abs(out.data.mean(axis=1)) <= 1e-12)


def test_est_cov_single_row():
    e = Ensemble(np.array([[1.0, -1.0]]), centered=True)
    c = est_cov(e, e)
    assert np.array_equal(c.matrix, np.array([[1.0]]))
    assert c.samples == 2


def test_est_cov_zero_partner():
    a = Ensemble(np.array([[1.0, -1.0]]), centered=True)
    b = Ensemble(np.zeros((2, 2)), centered=True)
    assert np.array_equal(est_cov(a, b).matrix, np.zeros((1, 2)))


def test_est_cov_orthogonal_rows():
    a = Ensemble(np.array([[1.0, -1.0]]), centered=True)
    b = center(Ensemble(np.array([[1.0, 1.0]])))
    assert np.array_equal(est_cov(a, b).matrix, np.array([[0.0]]))


def test_est_cov_requires_centered():
    a = Ensemble(np.array([[1.0, 2.0]]))
    b = Ensemble(np.array([[1.0, -1.0]]), centered=True)
    with pytest.raises(InvalidInput):
        est_cov(a, b)


def test_est_cov_requires_equal_samples(rng):
    a = make_ensemble(rng, 2, 4)
    b = make_ensemble(rng, 2, 6)
    with pytest.raises(InvalidInput):
        est_cov(a, b)


def test_est_cov_transpose_symmetry(rng):
    a = make_ensemble(rng, 3, 7)
    b = make_ensemble(rng, 5, 7)
    assert np.array_equal(est_cov(a, b).matrix, est_cov(b, a).matrix.T)


def test_est_cov_self_is_psd(rng):
    a = make_ensemble(rng, 4, 9)
    c = est_cov(a, a).matrix
    scale = np.linalg.norm(c)
    assert np.linalg.norm(c - c.T) <= 1e-10 * scale
    assert np.linalg.eigvalsh(c).min() >= -1e-10 * scale


def test_energy_values(rng):
    assert energy(Ensemble(np.zeros((3, 4)), centered=True)) == 0.0
    assert energy(Ensemble(np.array([[1.0, -1.0]]), centered=True)) == 1.0
    e = make_ensemble(rng, 3, 5)
    scaled = Ensemble(2.5 * e.data, centered=True)
    assert np.isclose(energy(scaled), 2.5**2 * energy(e), rtol=1e-12)


def test_energy_matches_cov_trace(rng):
    e = make_ensemble(rng, 4, 11)
    tr = float(np.trace(est_cov(e, e).matrix))
    assert abs(energy(e) - tr) <= 1e-10 * max(tr, 1.0)


def test_apply_q_identity(rng):
    seq = SignalSequence(tuple(make_ensemble(rng, 2, 4) for _ in range(3)))
    for i in range(3):
        assert apply_q(QOperatorSpec.identity(), seq, i) is seq[i]


def test_apply_q_lag_clamps_at_start(rng):
    seq = SignalSequence(tuple(make_ensemble(rng, 2, 4) for _ in range(3)))
    q = QOperatorSpec.sequence_lag(1)
    assert apply_q(q, seq, 0) is seq[0]  # clamped
    assert apply_q(q, seq, 2) is seq[1]


def test_apply_q_lag_zero_is_identity(rng):
    seq = SignalSequence(tuple(make_ensemble(rng, 2, 4) for _ in range(3)))
    for i in range(3):
        assert apply_q(QOperatorSpec.sequence_lag(0), seq, i) is seq[i]


def test_apply_q_component_shift(rng):
    seq = SignalSequence((make_ensemble(rng, 3, 4),))
    out = apply_q(QOperatorSpec.component_shift(1), seq, 0)
    assert np.array_equal(out.data, np.roll(seq[0].data, 1, axis=0))


def test_apply_q_weighted_prefix_sum():
    a = np.array([[1.0, -1.0]])
    b = np.array([[2.0, -2.0]])
    c = np.array([[8.0, -8.0]])
    seq = SignalSequence(tuple(Ensemble(v, centered=True) for v in (a, b, c)))
    q = QOperatorSpec.weighted_prefix_sum([1.0, 1.0])
    out = apply_q(q, seq, 1)
    assert np.array_equal(out.data, a + b)
    # weights exhausted before position 2: same sum
    assert np.array_equal(apply_q(q, seq, 2).data, a + b)
    weighted = QOperatorSpec.weighted_prefix_sum([0.5, 2.0])
    assert np.array_equal(apply_q(weighted, seq, 1).data, 0.5 * a + 2.0 * b)


def test_apply_q_weighted_prefix_sum_too_many_weights():
    seq = SignalSequence((Ensemble(np.zeros((1, 2)), centered=True),))
    q = QOperatorSpec.weighted_prefix_sum([1.0, 1.0])
    with pytest.raises(InvalidInput):
        apply_q(q, seq, 0)


def test_apply_q_index_out_of_range(rng):
    seq = SignalSequence((make_ensemble(rng, 2, 4),))
    with pytest.raises(InvalidInput):
        apply_q(QOperatorSpec.identity(), seq, 1)
    with pytest.raises(InvalidInput):
        apply_q(QOperatorSpec.identity(), seq, -1)


def test_q_spec_validation():
    with pytest.raises(InvalidInput):
        QOperatorSpec("unknown_kind")
    with pytest.raises(InvalidInput):
        QOperatorSpec.sequence_lag(-1)
    with pytest.raises(InvalidInput):
        QOperatorSpec.weighted_prefix_sum([np.nan])
    with pytest.raises(InvalidInput):
        QOperatorSpec.weighted_prefix_sum([])


def test_q_spec_dict_round_trip():
    specs = [
        QOperatorSpec.identity(),
        QOperatorSpec.sequence_lag(3),
        QOperatorSpec.component_shift(2),
        QOperatorSpec.weighted_prefix_sum([0.5, 1.5]),
    ]
    for q in specs:
        assert QOperatorSpec.from_dict(q.to_dict()) == q


def test_distinctness_flags_identical(rng):
    e = make_ensemble(rng, 2, 5)
    dup = Ensemble(e.data.copy(), centered=True)
    report = distinctness_check([e, dup, make_ensemble(rng, 2, 5)])
    assert report.pairs == ((0, 1),)
    assert not report.ok


def test_distinctness_single_and_distinct(rng):
    assert distinctness_check([make_ensemble(rng, 2, 5)]).ok
    vs = [make_ensemble(rng, 2, 5) for _ in range(4)]
    assert distinctness_check(vs).ok


def test_sequence_shape_validation(rng):
    with pytest.raises(InvalidInput):
        SignalSequence((make_ensemble(rng, 2, 4), make_ensemble(rng, 3, 4)))
    with pytest.raises(InvalidInput):
        SignalSequence(())


def test_training_set_validation(rng):
    seq = SignalSequence(tuple(make_ensemble(rng, 2, 6) for _ in range(5)))
    xs = (make_ensemble(rng, 3, 6), make_ensemble(rng, 3, 6))
    TrainingSet(xs, seq, (1, 3))  # fine
    with pytest.raises(InvalidInput):
        TrainingSet(xs, seq, (3, 1))  # not increasing
    with pytest.raises(InvalidInput):
        TrainingSet(xs, seq, (1, 1))  # not strictly increasing
    with pytest.raises(InvalidInput):
        TrainingSet(xs, seq, (1, 9))  # out of range
    with pytest.raises(InvalidInput):
        TrainingSet((), seq, ())  # empty
    with pytest.raises(InvalidInput):
        TrainingSet((make_ensemble(rng, 3, 4),), seq, (0,))  # sample mismatch
