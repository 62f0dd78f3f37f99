import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from hadachain.chaining import (
    AdmissibleSequence,
    FiniteMetricSpace,
    GaussianIndexSet,
    canonical_start,
    dudley_grid,
    dudley_integral,
    exact_gamma_small,
    fernique_band,
    gaussian_sup_mc,
    greedy_counts,
    greedy_gamma,
    level_cap,
    sequence_value,
)


def random_space(seed, size, dim=3):
    rng = np.random.default_rng(seed)
    return FiniteMetricSpace.from_vectors(rng.standard_normal((size, dim)))


def brute_gamma(fms, alpha=2.0):
    """Independent oracle: enumerate level-1 partitions as label vectors."""
    n = len(fms)
    if n <= 1:
        return 0.0
    best = math.inf
    for lab in itertools.product(range(4), repeat=n):
        lab = np.array(lab)
        worst = max(fms.dist[np.ix_(lab == b, lab == b)].max() for b in np.unique(lab))
        best = min(best, worst)
    return fms.diameter + 2 ** (1 / alpha) * best


def max_gauss_mean(d):
    """E max of d iid standard normals by quadrature."""
    f = lambda x: x * d * stats.norm.pdf(x) * stats.norm.cdf(x) ** (d - 1)
    return integrate.quad(f, -10, 10, limit=200)[0]


def test_level_cap():
    assert [level_cap(n) for n in range(4)] == [1, 4, 16, 256]


def test_metric_space_validation(tmp_path):
    with pytest.raises(ValueError):
        FiniteMetricSpace([[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        FiniteMetricSpace([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(ValueError):
        FiniteMetricSpace([[1, 1], [1, 1]])
    with pytest.raises(ValueError):
        FiniteMetricSpace([[0, -1], [-1, 0]])
    with pytest.raises(ValueError):
        FiniteMetricSpace([[0, 1]])
    with pytest.raises(ValueError):
        FiniteMetricSpace([[0, 1], [1, 0]], labels=["a"])
    fms = random_space(0, 6)
    fms.labels = list("abcdef")
    fms.to_csv(tmp_path / "d.csv")
    back = FiniteMetricSpace.from_csv(tmp_path / "d.csv")
    assert back.labels == list("abcdef") and np.array_equal(back.dist, fms.dist)
    np.savetxt(tmp_path / "plain.csv", fms.dist, delimiter=",")
    assert np.allclose(FiniteMetricSpace.from_csv(tmp_path / "plain.csv").dist, fms.dist)


def test_from_points_is_hyperbolic_metric(h2, rng):
    from hadachain.hyperbolic import distance, sample_ball_uniform

    pts = sample_ball_uniform(h2, h2.origin, 2.0, rng, 30)
    fms = FiniteMetricSpace.from_points(h2, pts)
    fms.validate()
    assert abs(fms.dist[3, 7] - distance(h2, pts[3], pts[7])) < 1e-12


def test_dudley_hand_values():
    assert dudley_integral(FiniteMetricSpace([[0.0]])) == 0
    two = FiniteMetricSpace([[0, 1], [1, 0]])
    assert abs(dudley_integral(two) - math.sqrt(math.log(2))) < 1e-12
    assert abs(dudley_integral(two, grid="exact") - math.sqrt(math.log(2))) < 1e-12
    assert abs(dudley_integral(two, alpha=1) - math.log(2)) < 1e-12
    with pytest.raises(ValueError):
        dudley_integral(two, alpha=0)
    with pytest.raises(ValueError):
        dudley_integral(two, grid="fine")


def test_dudley_exact_step_sum():
    # points 0, 1, 3 on a line: traversal radii 2 (one centre at 1), then 1, then 0
    line = FiniteMetricSpace.from_vectors([[0.0], [1.0], [3.0]])
    exact = 1 * math.sqrt(math.log(2)) + 1 * math.sqrt(math.log(3))
    assert abs(dudley_integral(line, grid="exact") - exact) < 1e-12
    assert list(greedy_counts(line, [2.5, 1.5, 0.5])) == [1, 2, 3]


def test_dudley_grid_shape():
    g = dudley_grid(2.0)
    assert len(g) == 64 and g[0] == 2.0 and abs(g[-1] - 2.0 / 256) < 1e-15


def test_default_grid_close_to_exact():
    for seed in range(20):
        fms = random_space(seed, 200)
        exact = dudley_integral(fms, grid="exact")
        assert abs(dudley_integral(fms) - exact) <= 0.05 * exact


@pytest.mark.xfail(strict=True, reason="trapezoid on 16 log-spaced nodes misses jumps of the step "
                                       "integrand; 16 vs 64 nodes differ by ~10% on 200-point clouds")
def test_dudley_grid_refinement_16_to_64():
    worst = 0.0
    for seed in range(20):
        fms = random_space(seed, 200)
        d = fms.diameter
        coarse = dudley_integral(fms, grid=dudley_grid(d, 16))
        fine = dudley_integral(fms, grid=dudley_grid(d, 64))
        worst = max(worst, abs(coarse - fine) / fine)
    assert worst < 0.05


def test_gamma_hand_values():
    for delta in (0.3, 1.5, 7.0):
        two = FiniteMetricSpace([[0, delta], [delta, 0]])
        assert abs(exact_gamma_small(two) - delta) < 1e-12
        seq = greedy_gamma(two)
        assert abs(seq.value - delta) < 1e-12
        assert len(seq.partitions) == 2
    tri = FiniteMetricSpace([[0, 2, 2], [2, 0, 2], [2, 2, 0]])
    assert abs(exact_gamma_small(tri) - 2) < 1e-12
    assert exact_gamma_small(FiniteMetricSpace([[0.0]])) == 0
    assert greedy_gamma(FiniteMetricSpace([[0.0]])).value == 0


def test_exact_gamma_matches_brute_force():
    for seed in range(30):
        fms = random_space(seed, 1 + seed % 5)
        assert abs(exact_gamma_small(fms) - brute_gamma(fms)) < 1e-12
    with pytest.raises(ValueError):
        exact_gamma_small(random_space(0, 7))


def test_greedy_at_least_exact():
    for seed in range(100):
        fms = random_space(seed, 2 + seed % 4)
        assert greedy_gamma(fms).value >= exact_gamma_small(fms) - 1e-12


def test_exact_gamma_monotone_under_subsets():
    for seed in range(30):
        fms = random_space(seed, 5)
        full = exact_gamma_small(fms)
        for sub in itertools.combinations(range(5), 3):
            assert exact_gamma_small(fms.subspace(sub)) <= full + 1e-12


def test_greedy_sequence_is_admissible():
    for seed in range(10):
        fms = random_space(seed, 300)
        seq = greedy_gamma(fms)
        seq.check(fms)
        assert len(np.unique(seq.partitions[-1])) == len(fms)
        assert seq.value == sequence_value(fms, seq.partitions, 2.0)


def test_check_rejects_bad_sequences():
    fms = random_space(0, 4)
    with pytest.raises(AssertionError):
        AdmissibleSequence([np.array([0, 0, 1, 1])], 2.0, 0.0).check()
    with pytest.raises(AssertionError):
        AdmissibleSequence([np.zeros(4, int), np.array([0, 1, 2, 3]), np.array([0, 0, 2, 3])], 2.0, 0.0).check()
    with pytest.raises(AssertionError):
        AdmissibleSequence([np.zeros(4, int), np.arange(4)], 2.0, 123.0).check(fms)
    with pytest.raises(AssertionError):
        AdmissibleSequence([np.zeros(5, int), np.arange(5)], 2.0, 0.0).check()


def test_duplicate_points_terminate():
    fms = FiniteMetricSpace.from_vectors([[0.0], [0.0], [1.0], [1.0]])
    seq = greedy_gamma(fms)
    seq.check(fms)
    assert seq.value == pytest.approx(1.0)


def test_greedy_within_eight_dudley():
    for seed in range(100):
        fms = random_space(seed, 8 + (seed * 37) % 249, dim=2 + seed % 3)
        assert greedy_gamma(fms).value <= 8 * dudley_integral(fms)


@given(seed=st.integers(0, 10_000), c=st.floats(0.1, 10.0))
def test_homogeneity(seed, c):
    fms = random_space(seed, 5)
    big = fms.scaled(c)
    assert greedy_gamma(big).value == pytest.approx(c * greedy_gamma(fms).value, rel=1e-12)
    assert exact_gamma_small(big) == pytest.approx(c * exact_gamma_small(fms), rel=1e-12)
    assert dudley_integral(big) == pytest.approx(c * dudley_integral(fms), rel=1e-12)


@given(seed=st.integers(0, 10_000))
def test_permutation_invariance(seed):
    fms = random_space(seed, 40)
    perm = np.random.default_rng(seed).permutation(40)
    other = fms.permuted(perm)
    assert canonical_start(other) == int(np.nonzero(perm == canonical_start(fms))[0][0])
    assert greedy_gamma(other).value == pytest.approx(greedy_gamma(fms).value, rel=1e-12)
    assert dudley_integral(other) == pytest.approx(dudley_integral(fms), rel=1e-12)


def test_gaussian_two_point_oracle():
    gset = GaussianIndexSet([[0.0, 0.0], [2.0, 0.0]])
    mc = gaussian_sup_mc(gset, 100_000, np.random.default_rng(1))
    assert abs(mc["mean_sup"] - 2 / math.sqrt(2 * math.pi)) <= 3 * mc["stderr"]
    assert np.allclose(gset.metric, [[0, 2], [2, 0]], atol=1e-12)
    with pytest.raises(ValueError):
        gaussian_sup_mc(gset, 999, np.random.default_rng(1))


def test_gaussian_single_zero_vector():
    mc = gaussian_sup_mc(GaussianIndexSet([[0.0, 0.0, 0.0]]), 1000, np.random.default_rng(0))
    assert mc["mean_sup"] == 0


def test_gaussian_orthonormal_against_quadrature():
    d = 64
    mc = gaussian_sup_mc(GaussianIndexSet(np.eye(d)), 50_000, np.random.default_rng(2))
    oracle = max_gauss_mean(d)
    assert abs(mc["mean_sup"] - oracle) <= 4 * mc["stderr"]
    # the classical sqrt(2 log d) is an upper bound, about 20% high at d = 64
    assert mc["mean_sup"] <= math.sqrt(2 * math.log(d))


def test_fernique_band_basics():
    two = fernique_band(GaussianIndexSet([[0.0, 0.0], [1.0, 0.0]]), trials=10_000, rng=np.random.default_rng(3))
    assert two["flag"] == "pass"
    assert two["L_lower"] * two["L_upper"] == pytest.approx(1.0)
    flat = fernique_band(GaussianIndexSet([[1.0, 2.0]] * 3), trials=1000)
    assert flat["flag"].startswith("not-assertable") and flat["L_upper"] is None


def test_fernique_random_unit_vectors():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((32, 8))
        band = fernique_band(GaussianIndexSet(v / np.linalg.norm(v, axis=1)[:, None]), trials=2000, rng=rng)
        assert band["flag"] == "pass"
        assert math.isfinite(band["L_upper"]) and 0 < band["L_upper"] <= 10


def test_fernique_scaling():
    v = np.random.default_rng(4).standard_normal((16, 5))
    a = fernique_band(GaussianIndexSet(v), trials=20_000, rng=np.random.default_rng(5))
    b = fernique_band(GaussianIndexSet(3 * v), trials=20_000, rng=np.random.default_rng(5))
    assert b["gamma_greedy"] == pytest.approx(3 * a["gamma_greedy"], rel=1e-12)
    assert b["mean_sup"] == pytest.approx(3 * a["mean_sup"], rel=1e-12)
    assert b["L_upper"] == pytest.approx(a["L_upper"], rel=1e-9)


def test_gaussian_csv(tmp_path):
    path = tmp_path / "v.csv"
    np.savetxt(path, np.eye(3), delimiter=",")
    assert GaussianIndexSet.from_csv(path).vectors.shape == (3, 3)
    with pytest.raises(ValueError):
        GaussianIndexSet(np.empty((0, 2)))
