import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gcimb.metrics import (
    OspaParams,
    approximation_error,
    dominant_term_ratio,
    efficiency_proportion,
    ospa,
    powered_sum_error,
    powered_sum_log_terms,
)
from gcimb.rfs import BernoulliTrack, GaussianDensity, MBPosterior

point_sets = st.integers(0, 4).flatmap(lambda n: arrays(np.float64, (n, 2), elements=st.floats(-10, 10)))


def test_ospa_identical_sets():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert ospa(x, x[::-1]) == 0.0
    assert ospa(np.zeros((0, 2)), np.zeros((0, 2))) == 0.0


def test_ospa_against_empty():
    assert ospa(np.array([[7.0, 7.0]]), np.zeros((0, 2))) == 5.0


def test_ospa_single_pair():
    assert ospa(np.array([[0.0]]), np.array([[1.0]])) == pytest.approx(1.0)


def test_ospa_cardinality_penalty():
    x = np.array([[0.0, 0.0], [10.0, 0.0]])
    y = np.array([[0.0, 1.0]])
    assert ospa(x, y) == pytest.approx((1.0 + 5.0) / 2)
    assert ospa(x, y, OspaParams(cutoff=5, order=2)) == pytest.approx(np.sqrt((1 + 25) / 2))


@given(point_sets, point_sets)
def test_ospa_symmetric_and_bounded(x, y):
    d = ospa(x, y)
    assert d == ospa(y, x)
    assert 0.0 <= d <= 5.0


@given(point_sets, point_sets, point_sets)
def test_ospa_triangle_inequality(x, y, z):
    assert ospa(x, z) <= ospa(x, y) + ospa(y, z) + 1e-9


def test_ospa_params_validation():
    with pytest.raises(ValueError):
        OspaParams(cutoff=0)
    with pytest.raises(ValueError):
        OspaParams(order=0.5)


def fig1_mb():
    return MBPosterior([BernoulliTrack(r, GaussianDensity([m], [[0.2]]))
                        for r, m in ((0.8, 3.0), (0.9, 4.0), (0.9, 7.0))])


def test_single_track_single_estimate_exact():
    mb = MBPosterior([BernoulliTrack(0.7, GaussianDensity([0.0], [[1.0]]))])
    assert approximation_error(mb, np.array([[0.4]]), 0.5) == 0.0


def test_fig1_single_estimate_far_track():
    mb = fig1_mb()
    x = np.array([[7.0]])
    logp = np.column_stack([np.atleast_1d(t.density.logpdf(x)) for t in mb.tracks])
    _, terms = powered_sum_log_terms(mb.existence, logp)
    assert dominant_term_ratio(terms) > 1 - 1e-9
    assert powered_sum_error(terms, 0.5)[1] <= 1e-4


def test_fig1_two_estimates_ratio():
    mb = fig1_mb()
    x = np.array([[4.0], [7.0]])
    logp = np.column_stack([t.density.logpdf(x) for t in mb.tracks])
    seqs, terms = powered_sum_log_terms(mb.existence, logp)
    assert len(seqs) == 6
    assert seqs[int(np.argmax(terms))] == (1, 2)
    assert dominant_term_ratio(terms) >= 0.95


def test_terms_by_hand():
    r = np.array([0.8, 0.9])
    logp = np.log(np.array([[0.5, 0.1]]))
    seqs, terms = powered_sum_log_terms(r, logp)
    assert seqs == [(0,), (1,)]
    np.testing.assert_allclose(np.exp(terms), [0.8 * 0.1 * 0.5, 0.2 * 0.9 * 0.1])


def test_degenerate_mb_has_zero_error():
    # only one index sequence can carry mass when the other track cannot exist
    mb = MBPosterior([BernoulliTrack(1.0, GaussianDensity([0.0], [[1.0]])),
                      BernoulliTrack(0.0, GaussianDensity([0.5], [[1.0]]))])
    assert approximation_error(mb, np.array([[0.2]]), 0.5) == 0.0


def _two_track_error(d):
    mb = MBPosterior([BernoulliTrack(0.9, GaussianDensity([0.0], [[0.04]])),
                      BernoulliTrack(0.9, GaussianDensity([d], [[0.04]]))])
    return approximation_error(mb, np.array([[0.0], [d]]), 0.5)


def test_error_shrinks_with_separation():
    assert _two_track_error(4.0) < _two_track_error(1.0)


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4), st.floats(0.05, 0.95))
def test_powered_sum_error_is_subadditivity_gap(r, omega):
    rng = np.random.default_rng(len(r))
    logp = rng.normal(size=(min(2, len(r)), len(r)))
    _, terms = powered_sum_log_terms(r, logp)
    err, _ = powered_sum_error(terms, omega)
    d = np.exp(terms)
    # for 0 < w < 1, sum(d**w) >= (sum d)**w
    assert err == pytest.approx(np.sum(d**omega) - np.sum(d) ** omega, rel=1e-9, abs=1e-15)
    assert 0 < dominant_term_ratio(terms) <= 1


def test_more_estimates_than_tracks_rejected():
    with pytest.raises(ValueError):
        approximation_error(fig1_mb(), np.zeros((4, 1)), 0.5)


def test_efficiency_proportion():
    assert efficiency_proportion([0.1, 0.2], 1.0) == 1.0
    assert efficiency_proportion([2.0, 3.0], 1.0) == 0.0
    assert efficiency_proportion([0.1, 0.2, 0.3, 4.0], 1.0) == 0.75
    with pytest.raises(ValueError):
        efficiency_proportion([], 1.0)
    with pytest.raises(ValueError):
        efficiency_proportion([1.0], 0.0)
