import math

import numpy as np
import pytest

import kpzlab as kz
from kpzlab.errors import ParameterError, RangeError
from kpzlab.scaling import (
    ScalingMap,
    CalibrationReport,
    power_law_fit,
    shear_correction,
    shear_pair,
)
from conftest import random_grid


class TestExactMap:
    def test_constants(self):
        m = ScalingMap.exact_exponential(256)
        assert m.c == 1024.0
        assert m.sigma_h == pytest.approx(2 ** (4 / 3) * 256 ** (1 / 3))
        assert m.sigma_x == pytest.approx(2 ** (5 / 3) * 256 ** (2 / 3))

    def test_rescale_anchors(self):
        m = ScalingMap.exact_exponential(64)
        assert m.to_rescaled(m.c) == 0.0
        assert m.to_rescaled(m.c + m.sigma_h) == pytest.approx(1.0)

    def test_site_anchors(self):
        m = ScalingMap.exact_exponential(32)
        assert m.site_of(0.0, 0.0) == (0, 0)
        assert m.site_of(0.0, 1.0) == (31, 31)

    def test_center_odd_n(self):
        m = ScalingMap.exact_exponential(9)
        assert m.site_of(0.0, 0.5) == (4, 4)

    def test_reflection(self):
        m = ScalingMap.exact_exponential(64)
        for x in (0.1, 0.25, 0.4):
            i1, j1 = m.site_of(x, 0.5)
            i2, j2 = m.site_of(-x, 0.5)
            assert (j1 - i1) == -(j2 - i2)

    def test_round_trip_within_rounding(self):
        m = ScalingMap.exact_exponential(128)
        step = 2.0 / m.sigma_x
        for x in (-0.7, -0.2, 0.0, 0.33, 0.81):
            for s in (0.5, 0.75):
                xr, sr = m.coord_of(m.site_of(x, s))
                assert abs(xr - x) <= step / 2 + 1e-12
                assert abs(sr - s) <= 0.5 / m.dmax + 1e-12

    def test_round_trip_identity_on_sites(self):
        m = ScalingMap.exact_exponential(32)
        for site in [(3, 5), (10, 10), (17, 4)]:
            x, s = m.coord_of(site)
            assert m.site_of(x, s) == site

    def test_out_of_range(self):
        m = ScalingMap.exact_exponential(16)
        with pytest.raises(RangeError):
            m.site_of(10.0, 0.5)
        with pytest.raises(RangeError):
            m.antidiag_of(1.5)

    def test_padding_frame(self):
        m = ScalingMap.exact_exponential(16, pad_before=4, pad_after=6)
        assert m.source_site == (4, 4)
        assert m.terminal_site == (19, 19)
        assert m.grid_shape == (26, 26)
        assert m.site_of(0.0, 0.0) == (4, 4)

    def test_sigma_x_over_n23_constant(self):
        vals = [
            ScalingMap.exact_exponential(n).sigma_x / n ** (2 / 3)
            for n in (64, 128, 256, 512)
        ]
        assert np.allclose(vals, vals[0])

    def test_segment_center_sums_to_c(self):
        m = ScalingMap.exact_exponential(64)
        cuts = [0, 40, 80, m.dmax]
        total = sum(m.segment_center(a, b) for a, b in zip(cuts, cuts[1:]))
        assert total == pytest.approx(m.c)


class TestPowerLawFit:
    def test_exact_square(self):
        slope, err = power_law_fit([1, 2, 3], [1, 4, 9])
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_constant(self):
        slope, _ = power_law_fit([1, 2, 4], [5, 5, 5])
        assert slope == pytest.approx(0.0, abs=1e-12)


class TestShear:
    def test_zero_shear_identical(self, rng):
        g = random_grid(rng, 40, 40)
        m = ScalingMap.exact_exponential(32, pad_before=4, pad_after=4)
        sheared, orig = shear_pair(g, m, 0.0, [(0.0, 0.0), (0.1, -0.1)])
        assert np.array_equal(sheared, orig)

    def test_correction_value(self):
        assert shear_correction(0.5, 0.0, 0.0, 1.0) == pytest.approx(0.25)


class TestCalibrate:
    def test_validation(self):
        with pytest.raises(ParameterError):
            kz.calibrate("exp-lpp", [64, 32], 1000, 1)
        with pytest.raises(ParameterError):
            kz.calibrate("exp-lpp", [32], 10, 1)

    def test_exp_lpp_small(self):
        report = kz.calibrate("exp-lpp", [24, 48], 1500, seed=5, threads=2)
        e24, e48 = report.entries
        # loose sanity at small n: c/n near 4, sigma_h near 2^(4/3) n^(1/3)
        assert abs(e48.c / 48 - 4.0) < 0.3
        assert abs(e48.sigma_h / (2 ** (4 / 3) * 48 ** (1 / 3)) - 1.0) < 0.25
        assert abs(e48.sigma_x / (2 ** (5 / 3) * 48 ** (2 / 3)) - 1.0) < 0.35
        assert e48.c > e24.c
        assert 0.1 < report.exponent < 0.6

    def test_polymer_c_increasing(self):
        report = kz.calibrate("exp-polymer", [16, 24], 1200, seed=6, threads=2)
        cs = [e.c for e in report.entries]
        assert cs[0] < cs[1]

    def test_json_round_trip(self):
        report = kz.calibrate("exp-lpp", [16, 24], 1000, seed=7, threads=2)
        back = CalibrationReport.from_json(report.to_json())
        assert back == report
        m = back.map_for(16)
        assert m.mode == "calibrated" and m.n == 16
