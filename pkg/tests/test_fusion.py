from itertools import combinations, permutations
from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gcimb.fusion import (
    FusionMap,
    FusionWeights,
    count_fusion_maps,
    enumerate_fusion_maps,
    fuse_track_pair,
    gci_mb_fuse,
    metropolis_row,
    metropolis_weights,
    moment_match,
    sequential_fuse,
)
from gcimb.mbfilter import FilterConfig, extract_estimates
from gcimb.rfs import (
    BernoulliTrack,
    GaussianDensity,
    GMBHypothesis,
    GMBPosterior,
    MBPosterior,
    ParticleDensity,
    phd_gmb,
    phd_mb,
)

HALF = FusionWeights(0.5, 0.5)


def separated_mb(rng, r=(0.9, 0.7, 0.5), n=300):
    centers = ([0, 0, 1, 0], [20, 0, 1, 0], [0, 20, 1, 0])
    return MBPosterior([BernoulliTrack(ri, ParticleDensity(np.array(c) + 0.5 * rng.standard_normal((n, 4))))
                        for ri, c in zip(r, centers)])


def test_fusion_map_rejects_non_injective():
    with pytest.raises(ValueError):
        FusionMap({0: 1, 1: 1})


def test_fusion_map_basics():
    m = FusionMap({1: 0, 0: 2})
    assert m.pairs == ((0, 2), (1, 0))
    assert m.domain == {0, 1} and m.image == {0, 2}
    assert m(1) == 0 and len(m) == 2
    assert m == FusionMap({0: 2, 1: 0}) and hash(m) == hash(FusionMap({0: 2, 1: 0}))


def test_two_by_two_has_six_nonempty_maps():
    maps = [m for n in (1, 2) for s in combinations(range(2), n) for m in enumerate_fusion_maps(s, range(2))]
    assert len(maps) == 6


def test_empty_subset_has_one_map():
    assert enumerate_fusion_maps((), range(3)) == [FusionMap()]


def test_singleton_into_three():
    assert len(enumerate_fusion_maps({0}, range(3))) == 3


@given(st.integers(0, 5), st.integers(0, 5))
def test_map_count_formula(n1, n2):
    expected = factorial(n2) // factorial(n2 - n1) if n1 <= n2 else 0
    assert count_fusion_maps(n1, n2) == expected
    if n1 <= n2:
        maps = enumerate_fusion_maps(range(n1), range(n2))
        assert len(maps) == expected == len(set(maps))
        assert set(maps) == {FusionMap(zip(range(n1), img)) for img in permutations(range(n2), n1)}


def test_fusion_weights_validation():
    with pytest.raises(ValueError):
        FusionWeights(0.7, 0.7)
    assert FusionWeights(0.3, 0.7).swapped() == FusionWeights(0.7, 0.3)


def test_pair_fusion_of_identical_clouds(rng):
    p = ParticleDensity(rng.standard_normal(10_000))
    res = fuse_track_pair(p, p, HALF)
    assert res.normalizer == pytest.approx(1.0, abs=0.05)
    assert res.density.mean()[0] == pytest.approx(0.0, abs=0.05)


def test_pair_fusion_disjoint_is_infeasible(rng):
    p1 = ParticleDensity(rng.standard_normal(200))
    p2 = ParticleDensity(1e6 + rng.standard_normal(200))
    res = fuse_track_pair(p1, p2, HALF)
    assert res.normalizer == 0.0 and not res.feasible


def test_pair_fusion_resamples_on_request(rng):
    p = ParticleDensity(rng.standard_normal((500, 2)))
    res = fuse_track_pair(p, p, HALF, rng, n_particles=100)
    assert res.density.count == 100


def test_gaussian_exponential_mixture_oracle(rng):
    m1, p1 = np.array([0.0, 0.0]), np.array([[1.0, 0.3], [0.3, 0.8]])
    m2, p2 = np.array([1.5, -0.5]), np.array([[0.6, 0.0], [0.0, 1.2]])
    a = ParticleDensity(rng.multivariate_normal(m1, p1, 10_000))
    b = ParticleDensity(rng.multivariate_normal(m2, p2, 10_000))
    res = fuse_track_pair(a, b, HALF)
    i1, i2 = np.linalg.inv(p1), np.linalg.inv(p2)
    cov = np.linalg.inv(0.5 * i1 + 0.5 * i2)
    mean = cov @ (0.5 * i1 @ m1 + 0.5 * i2 @ m2)
    # Z = int N1^.5 N2^.5 = Bhattacharyya coefficient
    pm = 0.5 * (p1 + p2)
    d = m1 - m2
    z = np.exp(-d @ np.linalg.solve(pm, d) / 8) * (np.linalg.det(p1) * np.linalg.det(p2)) ** 0.25 \
        / np.sqrt(np.linalg.det(pm))
    np.testing.assert_allclose(res.density.mean(), mean, atol=0.05 * np.sqrt(np.diag(cov)).max() + 0.02)
    np.testing.assert_allclose(res.density.cov(), cov, rtol=0.05, atol=0.05 * np.abs(cov).max())
    assert res.normalizer == pytest.approx(z, rel=0.05)


def test_identity_fusion_single_track(rng):
    d = ParticleDensity(rng.standard_normal((2000, 2)))
    for r in (0.3, 0.8):
        mb = MBPosterior([BernoulliTrack(r, d)])
        out = gci_mb_fuse(mb, mb, HALF, rng=rng)
        assert len(out.gmb) == 2
        assert out.mb[0].r == pytest.approx(r, abs=0.02)


def test_fusion_with_empty_posterior(rng):
    out = gci_mb_fuse(MBPosterior(), separated_mb(rng), HALF, rng=rng)
    assert len(out.mb) == 0
    assert out.gmb.hypotheses[0].fusion_map == FusionMap()


def test_fusion_swaps_to_smaller_side(rng):
    big, small = separated_mb(rng), MBPosterior(separated_mb(rng).tracks[:2])
    out = gci_mb_fuse(big, small, FusionWeights(0.8, 0.2), rng=rng)
    assert out.swapped and out.gmb.n_source_tracks == 2


def test_identity_fusion_preserves_tracks(rng):
    mb = separated_mb(rng)
    out = gci_mb_fuse(mb, mb, HALF, rng=rng)
    assert sum(h.weight for h in out.gmb.hypotheses) == pytest.approx(1.0, abs=1e-9)
    for a, b in zip(mb.tracks, out.mb.tracks):
        assert b.r == pytest.approx(a.r, abs=0.02)
        bw = a.density.kde.state_bandwidths
        assert np.all(np.abs(a.density.mean() - b.density.mean()) <= bw)


@pytest.mark.parametrize("r", [0.2, 0.5, 0.9])
def test_identity_fusion_keeps_estimate_count(rng, r):
    mb = separated_mb(rng, r=(r, r, r))
    cfg = FilterConfig()
    out = gci_mb_fuse(mb, mb, HALF, rng=rng).mb
    assert len(extract_estimates(out, cfg)) == len(extract_estimates(mb, cfg))


def test_all_infeasible_gives_empty(rng):
    a = MBPosterior([BernoulliTrack(1.0, ParticleDensity(rng.standard_normal((50, 2))))])
    b = MBPosterior([BernoulliTrack(1.0, ParticleDensity(1e6 + rng.standard_normal((50, 2))))])
    out = gci_mb_fuse(a, b, HALF, rng=rng)
    assert len(out.mb) == 0


def test_moment_match_single_hypothesis():
    g = GaussianDensity([0.0], [[1.0]])
    gmb = GMBPosterior((GMBHypothesis(FusionMap({0: 0}), 1.0, {0: g}, {0: 1.0}),), 1)
    out = moment_match(gmb, resample=False)
    assert out[0].r == 1.0
    assert out[0].density.pdf(np.array([[0.2]])) == pytest.approx(g.pdf(np.array([[0.2]]))[0])


def test_moment_match_existence_is_weight_sum():
    g = GaussianDensity([0.0], [[1.0]])
    gmb = GMBPosterior((GMBHypothesis(FusionMap({0: 0}), 0.6, {0: g}, {0: 1.0}),
                        GMBHypothesis(FusionMap(), 0.4)), 1)
    assert moment_match(gmb, resample=False)[0].r == pytest.approx(0.6)


def test_moment_match_phd_identity(rng):
    comps = [GaussianDensity([rng.normal(0, 3)], [[rng.uniform(0.3, 2)]]) for _ in range(9)]
    maps = [m for n in range(3) for s in combinations(range(2), n) for m in enumerate_fusion_maps(s, range(3))]
    w = rng.dirichlet(np.ones(len(maps)))
    hyps = tuple(GMBHypothesis(m, float(wi), {i: comps[3 * i + j] for i, j in m.pairs}, {i: 1.0 for i in m.domain})
                 for m, wi in zip(maps, w))
    gmb = GMBPosterior(hyps, 2)
    x = np.linspace(-10, 10, 100)[:, None]
    np.testing.assert_allclose(phd_mb(moment_match(gmb, resample=False), x), phd_gmb(gmb, x),
                               rtol=1e-10, atol=1e-12)


def test_metropolis_weights():
    chain = {1: {2}, 2: {1, 3}, 3: {2}}
    pair = {1: {2}, 2: {1}}
    assert metropolis_weights(pair, 1, 2).omega2 == pytest.approx(0.5)
    assert metropolis_weights(chain, 1, 2).omega2 == pytest.approx(1 / 3)
    assert metropolis_weights(chain, 2, 1).omega2 == metropolis_weights(chain, 1, 2).omega2
    with pytest.raises(ValueError):
        metropolis_weights(chain, 1, 3)


def test_metropolis_row_sums_to_one():
    chain = {1: {2}, 2: {1, 3}, 3: {2}}
    members, w = metropolis_row(chain, 2)
    assert members == [2, 1, 3]
    np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3])
    members, w = metropolis_row(chain, 1)
    np.testing.assert_allclose(w, [2 / 3, 1 / 3])


def test_sequential_single_posterior_unchanged(rng):
    mb = separated_mb(rng)
    assert sequential_fuse([mb]) is mb


def test_sequential_two_equals_pairwise(rng):
    a, b = separated_mb(rng), separated_mb(rng)
    seq = sequential_fuse([a, b], [0.6, 0.4], rng=np.random.default_rng(1))
    one = gci_mb_fuse(a, b, FusionWeights(0.6, 0.4), rng=np.random.default_rng(1)).mb
    np.testing.assert_allclose(seq.existence, one.existence)
    for s, o in zip(seq.tracks, one.tracks):
        np.testing.assert_array_equal(s.density.states, o.density.states)


def test_sequential_identical_three(rng):
    mb = separated_mb(rng)
    out = sequential_fuse([mb, mb, mb], rng=rng)
    for a, b in zip(mb.tracks, out.tracks):
        assert b.r == pytest.approx(a.r, abs=0.03)
        assert np.all(np.abs(a.density.mean() - b.density.mean()) <= a.density.kde.state_bandwidths)


def test_sequential_order_insensitive(rng):
    posts = [MBPosterior([BernoulliTrack(r, ParticleDensity(rng.normal(c, 1.0, size=(500, 2))))])
             for r, c in ((0.9, 0.0), (0.8, 0.5), (0.7, -0.3))]
    fwd = sequential_fuse(posts, rng=rng)
    rev = sequential_fuse(posts[::-1], rng=rng)
    assert fwd[0].r == pytest.approx(rev[0].r, abs=0.05)
    bw = fwd[0].density.kde.state_bandwidths
    assert np.all(np.abs(fwd[0].density.mean() - rev[0].density.mean()) <= 2 * bw)


def test_sequential_validates_exponents(rng):
    mb = separated_mb(rng)
    with pytest.raises(ValueError):
        sequential_fuse([mb, mb], [0.9, 0.9])
    with pytest.raises(ValueError):
        sequential_fuse([])


@given(st.integers(0, 2**32 - 1))
def test_underflow_shortcut_bound_is_valid(seed):
    import gcimb.fusion as fusion_module
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    a = ParticleDensity(rng.normal(0, rng.uniform(0.05, 2), size=(int(rng.integers(2, 100)), d)))
    b = ParticleDensity(rng.normal(rng.uniform(0, 8), rng.uniform(0.05, 2), size=(int(rng.integers(2, 100)), d)))
    w = float(rng.uniform(0.05, 0.95))
    bound = fusion_module._log_z_upper_bound(a.kde, b.kde, FusionWeights(w, 1 - w))
    log_num = w * a.kde.logpdf(np.vstack([a.kde.centers, b.kde.centers])) \
        + (1 - w) * b.kde.logpdf(np.vstack([a.kde.centers, b.kde.centers]))
    log_den = np.logaddexp(np.log(a.kde.count) + a.kde.logpdf(np.vstack([a.kde.centers, b.kde.centers])),
                           np.log(b.kde.count) + b.kde.logpdf(np.vstack([a.kde.centers, b.kde.centers])))
    from scipy.special import logsumexp
    assert logsumexp(log_num - log_den) <= bound + 1e-9
