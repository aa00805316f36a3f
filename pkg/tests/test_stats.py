import math

import numpy as np
import pytest
from scipy.stats import kstest, norm

import kpzlab as kz
from kpzlab import rare, stats
from kpzlab.errors import InsufficientDataError, ParameterError, RangeError
from kpzlab.rare import ModelSpec
from kpzlab.scaling import ScalingMap


class TestWeightedPrimitives:
    def test_reduce_to_unweighted(self, rng):
        x = rng.normal(size=500)
        y = rng.normal(size=500)
        w = np.ones(500)
        assert stats.wmean(x, w) == pytest.approx(x.mean())
        assert stats.wvar(x, w) == pytest.approx(x.var())
        assert stats.wcov(x, y, w) == pytest.approx(np.cov(x, y, ddof=0)[0, 1])
        for q in (0.1, 0.5, 0.9):
            assert stats.wquantile(x, w, q) == pytest.approx(
                np.quantile(x, q, method="inverted_cdf")
            )

    def test_weighted_quantile_simple(self):
        x = np.array([1.0, 2.0, 3.0])
        w = np.array([1.0, 1.0, 8.0])
        assert stats.wquantile(x, w, 0.5) == 3.0


class TestKolmogorovSmirnov:
    @pytest.mark.parametrize(
        "t,p", [(1.3581, 0.05), (1.2238, 0.10), (1.6276, 0.01)]
    )
    def test_tabulated_points(self, t, p):
        assert stats.kolmogorov_sf(t) == pytest.approx(p, abs=2e-3)

    def test_one_sample_matches_scipy(self, rng):
        x = rng.normal(size=300)
        w = np.ones(300)
        D, _ = stats.ks_one_sample(x, w, norm.cdf)
        want = kstest(x, norm.cdf)
        assert D == pytest.approx(want.statistic, abs=1e-12)

    def test_null_pvalues_reasonable(self, rng):
        ps = []
        for k in range(40):
            x = rng.normal(size=250)
            _, p = stats.ks_one_sample(x, np.ones(250), norm.cdf)
            ps.append(p)
        assert np.mean(np.array(ps) < 0.05) < 0.25

    def test_two_sample_identical_zero(self):
        x = np.arange(10.0)
        D, p = stats.ks_two_sample(x, x)
        assert D == 0.0 and p == 1.0


class TestExponentFit:
    def test_exact_power(self):
        slope, err = stats.exponent_fit([(1, 1), (2, 4), (3, 9)])
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_constant(self):
        slope, _ = stats.exponent_fit([(1, 5), (2, 5), (3, 5)])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ParameterError):
            stats.exponent_fit([(1, 1), (2, 4)])
        with pytest.raises(ParameterError):
            stats.exponent_fit([(1, 1), (2, -4), (3, 9)])


class TestGaussianBridgeMechanism:
    def test_delta_zero(self):
        exact, _ = stats.gaussian_bridge_mechanism(16.0, 0.0, 2.0)
        assert exact == 1.0

    def test_leading_term(self):
        _, lead = stats.gaussian_bridge_mechanism(16.0, 0.5, 2.0)
        assert lead == pytest.approx(math.exp(-4.0))

    def test_exact_within_band(self):
        exact, lead = stats.gaussian_bridge_mechanism(16.0, 0.5, 2.0)
        slack = math.exp(0.5 * 16 ** -0.25 * math.log(16.0))
        assert lead / slack <= exact <= lead * slack
        assert exact == pytest.approx(0.017, abs=0.002)

    def test_validation(self):
        with pytest.raises(ParameterError):
            stats.gaussian_bridge_mechanism(16.0, 0.5, 4.0)
        with pytest.raises(ParameterError):
            stats.gaussian_bridge_mechanism(16.0, -0.5, 2.0)


class TestBridgeTargets:
    def test_variance_half(self):
        assert stats.bridge_target_cov([0.5])[0, 0] == pytest.approx(0.25)

    def test_cov_thirds(self):
        cov = stats.bridge_target_cov([1 / 3, 2 / 3])
        assert cov[0, 1] == pytest.approx(1 / 9)

    def test_increment_targets(self):
        # bridge increment variance (t-s)(1-(t-s))
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "quantile", 300, 1, q=0.9, threads=1)
        rep = stats.two_point_increment(ens, 0.25, 0.75, threads=1)
        assert rep.target == pytest.approx(0.25)
        same = stats.two_point_increment(ens, 0.5, 0.5, threads=1)
        assert same.variance == 0.0 and same.target == 0.0


class TestBridgeFdd:
    def test_insufficient_samples(self):
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "quantile", 100, 2, q=0.5, threads=1)
        with pytest.raises(InsufficientDataError):
            stats.bridge_fdd(ens, [0.5], threads=1)

    def test_report_is_pure(self):
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "quantile", 600, 3, q=0.5, threads=1)
        r1 = stats.bridge_fdd(ens, [0.5], threads=1)
        r2 = stats.bridge_fdd(ens, [0.5], threads=2)
        assert r1.to_dict() == r2.to_dict()

    def test_times_validation(self):
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "quantile", 400, 4, q=0.9, threads=1)
        with pytest.raises(ParameterError):
            stats.bridge_fdd(ens, [0.0, 0.5], threads=1)


class TestTent:
    def test_profile_values(self):
        L = 2.5
        assert stats.tent_profile(L, np.array([0.0]))[0] == pytest.approx(L)
        assert stats.tent_profile(L, np.array([math.sqrt(L)]))[0] == pytest.approx(-L)

    def test_range_error(self):
        spec = ModelSpec("exp-lpp", 16)  # no padding: x away from 0 must fail
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "rejection", 3000, 5, target_L=0.5, threads=1)
        with pytest.raises(RangeError):
            stats.tent_fit(ens, [0.0, 1.0], threads=1)


class TestCoalescence:
    def test_degenerate_window_zero_defect(self):
        pad = 10
        spec = ModelSpec("exp-lpp", 12, pad_before=pad, pad_after=pad)
        smap = ScalingMap.exact_exponential(12, pad_before=pad, pad_after=pad)
        ens = rare.condition(spec, smap, "quantile", 200, 6, q=0.9, threads=1)
        rep = stats.coalescence(ens, window_halfwidth=0.0, threads=1)
        assert (rep.defects == 0.0).all()
        assert rep.zero_defect_fraction == 1.0

    def test_unconditioned_majority_positive(self):
        pad = 14
        spec = ModelSpec("exp-lpp", 24, pad_before=pad, pad_after=pad)
        smap = ScalingMap.exact_exponential(24, pad_before=pad, pad_after=pad)
        ens = rare.condition(spec, smap, "rejection", 150, 7, target_L=-math.inf, threads=1)
        rep = stats.coalescence(ens, window_halfwidth=0.5, threads=1)
        assert (rep.defects >= -1e-12).all()
        assert rep.zero_defect_fraction < 0.5

    def test_unconditioned_needs_explicit_window(self):
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "rejection", 50, 8, target_L=-math.inf, threads=1)
        with pytest.raises(ParameterError):
            stats.coalescence(ens, threads=1)


class TestLocalization:
    @pytest.fixture(scope="class")
    def polymer_ensemble(self):
        spec = ModelSpec("exp-polymer", 24, beta=1.0)
        report = kz.calibrate("exp-polymer", [24], 1500, seed=41, threads=2)
        smap = report.map_for(24)
        return rare.condition(spec, smap, "rejection", 20000, 9, target_L=1.5, threads=2)

    def test_window_covering_all_zero_mass(self, polymer_ensemble):
        ens = polymer_ensemble
        rep = stats.localization(ens, 0.5, M=1000.0, threads=1)
        assert (rep.outside_mass == 0.0).all()

    def test_mass_in_unit_interval(self, polymer_ensemble):
        rep = stats.localization(polymer_ensemble, 0.5, M=0.5, threads=1)
        assert ((rep.outside_mass >= 0) & (rep.outside_mass <= 1)).all()

    def test_zero_temperature_rejected(self):
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition(spec, smap, "quantile", 200, 10, q=0.5, threads=1)
        with pytest.raises(ParameterError):
            stats.localization(ens, 0.5, 8.0, threads=1)


class TestProportionality:
    def test_no_interior_times_empty(self):
        spec = ModelSpec("exp-lpp", 16)
        smap = ScalingMap.exact_exponential(16)
        ens = rare.condition_segments(spec, smap, [], "quantile", 200, 11, q=0.5, threads=1)
        rep = stats.proportionality(ens)
        assert rep.deviations.shape[1] == 0  # k=1: no interior time, empty vector

    def test_deviations_sum_to_overshoot(self):
        spec = ModelSpec("exp-lpp", 24)
        smap = ScalingMap.exact_exponential(24)
        ens = rare.condition_segments(
            spec, smap, [0.5], "quantile", 400, 12, q=0.2, threads=1
        )
        rep = stats.proportionality(ens)
        L = ens.threshold_L
        ds = np.array([0.5, 0.5])
        order = ens.canonical_order()
        recon = (rep.deviations * np.sqrt(ds) * L**0.25).sum(axis=1)
        assert np.allclose(recon, ens.hhat[order] - L, atol=1e-9)


class TestShiftInvariance:
    def test_identical_families_zero_stat(self):
        pad = 16
        spec = ModelSpec("exp-lpp", 16, pad_before=pad, pad_after=pad)
        smap = ScalingMap.exact_exponential(16, pad_before=pad, pad_after=pad)
        fam = [(0.0, 0.3)]
        rep = stats.shift_invariance(
            spec, smap, fam, fam, seed=1, replicates=60, common_randomness=True, threads=1
        )
        assert rep.per_pair_ks[0][0] == 0.0
        assert rep.joint_sum_ks[0] == 0.0

    def test_hypothesis_validation(self):
        spec = ModelSpec("exp-lpp", 16, pad_before=16, pad_after=16)
        smap = ScalingMap.exact_exponential(16, pad_before=16, pad_after=16)
        with pytest.raises(ParameterError):
            # targets must be nonincreasing
            stats.shift_invariance(
                spec, smap, [(0.0, 0.1), (0.1, 0.3)], [(0.0, 0.1), (0.1, 0.3)], 1, 10
            )
        with pytest.raises(ParameterError):
            # differences must match
            stats.shift_invariance(
                spec, smap, [(0.0, 0.1)], [(0.0, 0.4)], 1, 10
            )
