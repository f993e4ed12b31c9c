"""Tests for threshold root finding and curve generation."""

from pathlib import Path

import pytest

from steerkey import ChannelParams, CurveSpec, ThresholdQuery, curve, curve_to_csv, find_threshold
from steerkey.thresholds import family_rate, _with_free

GOLDEN = Path(__file__).parent / "golden"


def threshold(family, free="eta_a", **params):
    return find_threshold(ThresholdQuery(family=family, params=ChannelParams(**params), free=free))


class TestFindThreshold:
    def test_onesided_ps(self):
        assert threshold("onesided_ps_r1", V=1.0) == pytest.approx(0.659, abs=1e-3)

    def test_onesided_nops(self):
        assert threshold("onesided_nops", V=1.0) == pytest.approx(0.780, abs=1e-3)

    def test_di_ps_both_efficiencies(self):
        assert threshold("di_ps_r2", free="eta", V=1.0) == pytest.approx(0.911, abs=1e-3)

    def test_di_ps_prepare_and_measure(self):
        assert threshold("di_ps_r2", V=1.0, eta_b=1.0) == pytest.approx(0.833, abs=1e-3)

    def test_di_mpa_prepare_and_measure(self):
        assert threshold("di_mpa", V=1.0, eta_b=1.0) == pytest.approx(0.896, abs=1e-3)

    def test_di_mpa_both_efficiencies_band(self):
        root = threshold("di_mpa", free="eta", V=1.0)
        assert 0.944 <= root <= 0.947

    def test_ordering_chain(self):
        roots = [
            threshold("onesided_ps_r1", V=1.0),
            threshold("onesided_nops", V=1.0),
            threshold("di_ps_r2", V=1.0, eta_b=1.0),
            threshold("di_mpa", V=1.0, eta_b=1.0),
            threshold("di_ps_r2", free="eta", V=1.0),
            threshold("di_mpa", free="eta", V=1.0),
        ]
        assert roots == sorted(roots)

    def test_root_brackets_a_sign_change(self):
        query = ThresholdQuery("onesided_ps_r1", ChannelParams(V=1.0), tolerance=1e-8)
        root = find_threshold(query)
        below = family_rate(query.family, _with_free(query.params, query.free, root - 1e-8))
        above = family_rate(query.family, _with_free(query.params, query.free, root + 1e-8))
        assert below <= 0.0 < above

    def test_none_when_rate_never_positive(self):
        # At V = 0.5 even perfect detectors give h(0.25) errors on both
        # bases, so the one-sided bound stays negative.
        assert threshold("onesided_ps_r1", V=0.5) is None

    def test_zero_when_rate_positive_everywhere(self):
        # The non-post-selected rate ignores eta_b entirely.
        assert threshold("onesided_nops", free="eta_b", V=1.0, eta_a=1.0) == 0.0

    def test_visibility_as_free_variable(self):
        root = threshold("onesided_ps_r1", free="V", V=1.0, eta_a=1.0)
        rate_above = family_rate("onesided_ps_r1", ChannelParams(V=root + 1e-3, eta_a=1.0))
        assert rate_above > 0

    def test_query_validation(self):
        with pytest.raises(ValueError):
            ThresholdQuery("bogus", ChannelParams(V=1.0))
        with pytest.raises(ValueError):
            ThresholdQuery("di_mpa", ChannelParams(V=1.0), free="theta")
        with pytest.raises(ValueError):
            ThresholdQuery("di_mpa", ChannelParams(V=1.0), tolerance=0.0)


class TestCurve:
    def test_perfect_endpoint(self):
        rows = curve(CurveSpec("onesided_ps_r1", (1.0,), (1.0, 1.0, 0.5)))
        assert rows[-1][2] == pytest.approx(1.0, abs=1e-12)

    def test_intercept_near_659_at_unit_visibility(self):
        rows = curve(CurveSpec("onesided_ps_r1", (1.0,), (0.0, 1.0, 0.001)))
        first_positive = next(eta for _, eta, rate in rows if rate > 0)
        assert first_positive == pytest.approx(0.659, abs=2e-3)

    def test_value_at_lower_visibility(self):
        rows = curve(CurveSpec("onesided_ps_r1", (0.95,), (1.0, 1.0, 0.5)))
        assert rows[0][2] == pytest.approx(0.6626781, abs=1e-5)

    def test_monotone_in_eta_per_visibility(self):
        for v in (1.0, 0.99, 0.98, 0.95):
            rows = curve(CurveSpec("onesided_ps_r1", (v,), (0.0, 1.0, 0.02)))
            rates = [rate for _, _, rate in rows]
            assert all(b >= a - 1e-12 for a, b in zip(rates, rates[1:]))

    def test_negative_rows_are_kept(self):
        rows = curve(CurveSpec("onesided_ps_r1", (1.0,), (0.0, 0.5, 0.1)))
        assert all(rate < 0 for _, _, rate in rows)

    def test_row_ordering_follows_grid(self):
        rows = curve(CurveSpec("onesided_ps_r1", (1.0, 0.95), (0.2, 0.4, 0.1)))
        assert [(v, round(eta, 6)) for v, eta, _ in rows] == [
            (1.0, 0.2), (1.0, 0.3), (1.0, 0.4),
            (0.95, 0.2), (0.95, 0.3), (0.95, 0.4),
        ]

    def test_curve_spec_validation(self):
        with pytest.raises(ValueError):
            CurveSpec("onesided_ps_r1", (), (0.0, 1.0, 0.1))
        with pytest.raises(ValueError):
            CurveSpec("onesided_ps_r1", (1.2,), (0.0, 1.0, 0.1))
        with pytest.raises(ValueError):
            CurveSpec("onesided_ps_r1", (1.0,), (0.5, 0.4, 0.1))
        with pytest.raises(ValueError):
            CurveSpec("onesided_ps_r1", (1.0,), (0.0, 1.0, 0.0))


class TestCurveCsv:
    def test_matches_golden_file(self):
        spec = CurveSpec("onesided_ps_r1", (1.0, 0.95), (0.6, 0.7, 0.02))
        text = curve_to_csv(curve(spec))
        golden = (GOLDEN / "curve_onesided_sample.csv").read_bytes().decode()
        assert text == golden

    def test_header_and_line_endings(self):
        text = curve_to_csv(curve(CurveSpec("onesided_ps_r1", (1.0,), (0.5, 0.6, 0.1))))
        assert text.startswith("V,eta,rate\n")
        assert "\r" not in text
        assert text.endswith("\n")

    def test_fixed_six_decimal_fields(self):
        text = curve_to_csv([(1.0, 0.5, -0.25)])
        assert text.splitlines()[1] == "1.000000,0.500000,-0.250000"
