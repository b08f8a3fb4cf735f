import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from monfermi.stats import (
    Histogram,
    MaximaReport,
    bifurcation_scan,
    find_maxima,
    fit_power_law,
    ks_distance,
    merge,
    normalized_density,
    smoothed_density,
)

counts_st = st.lists(st.integers(0, 1000), min_size=100, max_size=100)


def hist(counts):
    return Histogram(100, np.array(counts))


def gaussian_mixture(centers, weights=None, width=0.05, n=100):
    x = (np.arange(n) + 0.5) / n
    weights = weights or [1.0] * len(centers)
    d = sum(w * np.exp(-(x - c) ** 2 / (2 * width**2)) for c, w in zip(centers, weights))
    return Histogram(n, np.round(1e5 * d).astype(np.int64))


# -------------------------------------------------------------- histogram

def test_binning_edges():
    h = Histogram.from_values([0.0, 0.005, 0.01, 0.999, 1.0, 0.5])
    assert h.counts[0] == 2 and h.counts[1] == 1 and h.counts[50] == 1 and h.counts[99] == 2
    assert h.total == 6


def test_density_integrates_to_one():
    h = Histogram.from_values(np.random.default_rng(0).random(1000))
    assert normalized_density(h).sum() * h.width == pytest.approx(1.0)
    with pytest.raises(ValueError):
        normalized_density(Histogram())


def test_roundtrip_and_mismatch():
    h = Histogram.from_values([0.1, 0.2], bin_count=10)
    assert np.array_equal(Histogram.from_dict(h.to_dict()).counts, h.counts)
    with pytest.raises(ValueError):
        merge(h, Histogram())
    with pytest.raises(ValueError):
        Histogram(10, np.zeros(5))


@given(counts_st, counts_st, counts_st)
def test_merge_commutative_associative(a, b, c):
    A, B, C = hist(a), hist(b), hist(c)
    assert np.array_equal(merge(A, B).counts, merge(B, A).counts)
    assert np.array_equal(merge(merge(A, B), C).counts, merge(A, merge(B, C)).counts)
    assert merge(A, B).total == A.total + B.total


@given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
def test_mirror_matches_one_minus_values(values):
    v = np.array(values)
    # values sitting exactly on an inner edge switch bins under n -> 1 - n
    assume(not np.any(np.isclose((v * 100) % 1, 0, atol=1e-9) & (v > 0) & (v < 1)))
    assert np.array_equal(Histogram.from_values(v).mirrored().counts,
                          Histogram.from_values(1 - v).counts)


# ---------------------------------------------------------------- maxima

def test_smoothing_preserves_constant_and_rejects_even_window():
    h = hist([10] * 100)
    np.testing.assert_allclose(smoothed_density(h, 5), 1.0)
    with pytest.raises(ValueError):
        smoothed_density(h, 4)


def test_unimodal_gaussian():
    r = find_maxima(gaussian_mixture([0.5]))
    assert r.modality == "unimodal" and r.n_plus == pytest.approx(0.495)


def test_symmetric_bimodal_ties_break_toward_center():
    h = gaussian_mixture([0.2, 0.8])
    r = find_maxima(h)
    assert r.modality == "bimodal"
    assert sorted([r.n_plus, r.n_minus]) == [pytest.approx(0.205), pytest.approx(0.795)]


def test_asymmetric_bimodal():
    r = find_maxima(gaussian_mixture([0.1, 0.7], [1.0, 0.5]))
    # both peaks are two-bin plateaus; the bin nearer 1/2 represents each
    assert r.n_plus == pytest.approx(0.105) and r.n_minus == pytest.approx(0.695)
    assert r.p_plus > r.p_minus


def test_boundary_peaks_count():
    counts = np.zeros(100, dtype=int)
    counts[0], counts[99], counts[50] = 1000, 800, 10
    r = find_maxima(hist(counts), smooth_window=1)
    assert (r.n_plus, r.n_minus) == (0.005, 0.995)


def test_small_bump_below_prominence_is_ignored():
    r = find_maxima(gaussian_mixture([0.5, 0.9], [1.0, 0.02]))
    assert r.modality == "unimodal"


def test_flat_histogram_has_single_maximum():
    r = find_maxima(hist([5] * 100))
    assert r.modality == "unimodal"


@settings(max_examples=60)
@given(counts_st)
def test_mirror_maps_maxima(counts):
    h = hist(counts)
    assume(h.total > 0)
    a, b = find_maxima(h), find_maxima(h.mirrored())
    assert a.p_plus == pytest.approx(b.p_plus)
    assert a.modality == b.modality
    s = smoothed_density(h)
    if np.sum(s == a.p_plus) == 1 or a.modality == "unimodal":
        assert b.n_plus == pytest.approx(1 - a.n_plus)


# ----------------------------------------------------------- bifurcation

def uni():
    return MaximaReport(0.5, 1.0)


def bi():
    return MaximaReport(0.2, 1.0, 0.8, 0.9)


def test_bifurcation_bracket():
    est = bifurcation_scan([(0.1, uni()), (0.2, uni()), (0.25, bi()), (0.3, bi())])
    assert est.bracket == (0.2, 0.25) and est.threshold == pytest.approx(0.225)
    assert est.monotonic


def test_bifurcation_order_independent():
    pts = [(0.3, bi()), (0.1, uni()), (0.25, bi()), (0.2, uni())]
    assert bifurcation_scan(pts) == bifurcation_scan(sorted(pts, key=lambda p: p[0]))


def test_bifurcation_nonmonotonic_flag():
    est = bifurcation_scan([(0.1, bi()), (0.2, uni()), (0.3, bi())])
    assert est.bracket == (0.2, 0.3) and not est.monotonic


@pytest.mark.parametrize("pts", [
    [(0.1, uni()), (0.2, uni())], [(0.1, bi()), (0.2, bi())], [(0.1, bi()), (0.2, uni())]])
def test_no_bifurcation(pts):
    est = bifurcation_scan(pts)
    assert est.threshold is None and "no bifurcation" in est.message


# ------------------------------------------------------------- power law

def test_exact_power_law():
    pts = [(L, 3.0 * L**-0.7) for L in (16, 32, 64, 128)]
    fit = fit_power_law(pts)
    assert fit.alpha == pytest.approx(0.7, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_flat_data_gives_alpha_zero_and_r2_one():
    fit = fit_power_law([(16, 0.2), (32, 0.2), (64, 0.2)])
    assert fit.alpha == pytest.approx(0.0, abs=1e-14) and fit.r_squared == 1.0


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_power_law([(16, 0.1), (32, 0.05)])
    with pytest.raises(ValueError):
        fit_power_law([(16, 0.1), (16, 0.09), (32, 0.05)])
    with pytest.raises(ValueError):
        fit_power_law([(16, 0.1), (32, 0.0), (64, 0.01)])


def test_weighted_fit_follows_precise_points():
    pts = [(16, 0.1, 1e-6), (32, 0.05, 1e-6), (64, 0.025, 1e-6), (128, 0.1, 1.0)]
    assert fit_power_law(pts, weighted=True).alpha == pytest.approx(1.0, abs=1e-3)
    assert fit_power_law(pts).alpha < 0.8


@settings(max_examples=50)
@given(st.lists(st.floats(1e-4, 1.0), min_size=4, max_size=4),
       st.floats(0.01, 100), st.floats(0.5, 8))
def test_fit_scale_covariance(ipr, c, s):
    L = [16, 32, 64, 128]
    base = fit_power_law(zip(L, ipr))
    scaled_y = fit_power_law(zip(L, [c * y for y in ipr]))
    scaled_L = fit_power_law(zip([s * x for x in L], ipr))
    assert scaled_y.alpha == pytest.approx(base.alpha, abs=1e-9)
    assert scaled_L.alpha == pytest.approx(base.alpha, abs=1e-9)
    assert scaled_y.r_squared == pytest.approx(base.r_squared, abs=1e-9)


# ------------------------------------------------------------ KS distance

def test_ks_examples():
    a = Histogram.from_values([0.1] * 10)
    b = Histogram.from_values([0.9] * 10)
    assert ks_distance(a, b) == 1.0
    assert ks_distance(a, a) == 0.0


@given(counts_st, counts_st)
def test_ks_properties(a, b):
    A, B = hist(a), hist(b)
    assume(A.total > 0 and B.total > 0)
    d = ks_distance(A, B)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert d == pytest.approx(ks_distance(B, A))
    assert ks_distance(A, merge(A, A)) == pytest.approx(0.0, abs=1e-12)
