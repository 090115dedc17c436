import math

import numpy as np
import pytest

from lumen_servo import world
from lumen_servo.errors import (DegenerateProfile, DegenerateStart,
                                GoalNotReached)
from lumen_servo.metrics import (NTRSeries, SpectralParams, TrialLog,
                                 centering_metrics, depth_error_series, ldj,
                                 nav_errors, ntr, peak_count, sparc, tip_speed)

CENTER = (319.5, 239.5)

# analytic log-dimensionless jerk of the minimum-jerk profile
# v(t) = 30(t^2 - 2t^3 + t^4) on [0,1]:  v_p = 30/16, integral |v''|^2 = 720,
# so LDJ = -ln(T * 720 / v_p^2) = -ln(204.8)
MIN_JERK_LDJ = -math.log(204.8)

# Gaussian speed pulse (sigma 0.2 s over 2 s): independent oracle computed at
# dt = 1e-5 with 8x extra zero padding before this suite was written
GAUSSIAN_SPARC = -1.4164144018054254


def make_log(tip, dt=0.1, p_hat=None, path_id="A"):
    tip = np.asarray(tip, dtype=float)
    n = len(tip)
    if p_hat is None:
        p_hat = np.tile(CENTER, (n, 1))
    rho = np.linalg.norm(p_hat - np.asarray(CENTER), axis=1)
    return TrialLog(t=np.arange(n) * dt, q=np.zeros((n, 3)),
                    q_dot=np.zeros((n, 3)), tip=tip, p=p_hat.copy(),
                    p_hat=p_hat, rho=rho, v=np.zeros((n, 2)),
                    mode=["centering"] * n, clearance=np.full(n, 5.0),
                    dt=dt, path_id=path_id)


def min_jerk(dt=1e-3):
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    return 30 * (t ** 2 - 2 * t ** 3 + t ** 4)


def gaussian_pulse(dt=1e-3):
    t = np.arange(0.0, 2.0, dt)
    return np.exp(-0.5 * ((t - 1.0) / 0.2) ** 2)


class TestNtr:
    @staticmethod
    def _log(points):
        pts = np.asarray(points, dtype=float)
        return make_log(np.zeros((len(pts), 3)), p_hat=pts)

    def test_starts_at_zero(self):
        series = ntr(self._log([[419.5, 339.5], [369.5, 289.5]]))
        assert series.pxn[0] == series.pyn[0] == series.rhon[0] == 0.0

    def test_reaching_center_gives_set_point(self):
        series = ntr(self._log([[419.5, 339.5], [319.5, 239.5]]))
        assert series.pxn[-1] == pytest.approx(1.0)
        assert series.pyn[-1] == pytest.approx(1.0)
        assert series.rhon[-1] == pytest.approx(1.0)

    def test_half_error_gives_half_response(self):
        series = ntr(self._log([[419.5, 339.5], [369.5, 289.5]]))
        assert series.rhon[-1] == pytest.approx(0.5)

    def test_degenerate_start_rejected(self):
        with pytest.raises(DegenerateStart):
            ntr(self._log([[319.5, 239.5], [419.5, 239.5]]))

    def test_time_shift_invariance(self):
        log1 = self._log([[419.5, 339.5], [369.5, 289.5], [339.5, 259.5]])
        log2 = self._log([[419.5, 339.5], [369.5, 289.5], [339.5, 259.5]])
        log2.t = log2.t + 7.0
        assert np.allclose(ntr(log1).rhon, ntr(log2).rhon)


class TestCenteringMetrics:
    def test_first_order_response_rise_time(self):
        tau = 4.0
        t = np.arange(0.0, 40.0, 0.1)
        rn = 1.0 - np.exp(-t / tau)
        rep = centering_metrics(NTRSeries(t=t, pxn=rn, pyn=rn, rhon=rn))
        assert rep.rt == pytest.approx(tau * (math.log(5) - math.log(1.25)),
                                       abs=0.05)
        assert rep.rt <= rep.st

    def test_constant_at_set_point(self):
        t = np.arange(0.0, 5.0, 0.1)
        one = np.ones_like(t)
        rep = centering_metrics(NTRSeries(t=t, pxn=one, pyn=one, rhon=one))
        assert rep.sse == 0.0
        assert rep.os_x == 0.0 and rep.os_y == 0.0

    def test_overshoot_formula_at_paper_magnitude(self):
        t = np.arange(0.0, 3.0, 0.1)
        rn = np.minimum(t, 1.0)
        xn = rn.copy()
        xn[15] = 1.118
        rep = centering_metrics(NTRSeries(t=t, pxn=xn, pyn=rn, rhon=rn))
        assert rep.os_x == pytest.approx(11.8)
        assert rep.os_y == 0.0

    def test_never_rising_series_reports_absent_rt_st(self):
        t = np.arange(0.0, 3.0, 0.1)
        low = np.full_like(t, 0.1)
        rep = centering_metrics(NTRSeries(t=t, pxn=low, pyn=low, rhon=low))
        assert rep.rt is None and rep.st is None
        assert rep.sse == pytest.approx(90.0)

    def test_settling_time_is_last_entry_into_band(self):
        t = np.arange(0.0, 10.0, 0.1)
        rn = np.ones_like(t)
        rn[:10] = np.linspace(0.0, 1.0, 10)
        rn[50] = 1.2                      # leaves the band once
        rep = centering_metrics(NTRSeries(t=t, pxn=rn, pyn=rn, rhon=rn))
        assert 5.0 <= rep.st <= 5.2


class TestNavErrors:
    def test_on_centerline_is_exact_zero(self):
        path = world.build_path("A")
        tip = np.array([[0.0, 0.0, z] for z in np.linspace(0, 135, 28)])
        ct, mae, max_ae = nav_errors(make_log(tip), path)
        assert mae == 0.0 and max_ae == 0.0
        assert ct == pytest.approx(0.1 * 26, abs=0.11)

    def test_constant_lateral_offset(self):
        path = world.build_path("A")
        tip = np.array([[1.0, 0.0, z] for z in np.linspace(0, 135, 28)])
        _, mae, max_ae = nav_errors(make_log(tip), path)
        assert mae == pytest.approx(1.0)
        assert max_ae == pytest.approx(1.0)

    def test_sinusoidal_wobble(self):
        path = world.build_path("A")
        z = np.linspace(0.0, 130.0, 4001)
        a = 1.5
        x = a * np.sin(2 * np.pi * z / 13.0)   # whole periods over the run
        tip = np.column_stack([x, np.zeros_like(z), z])
        _, mae, _ = nav_errors(make_log(tip), path)
        assert mae == pytest.approx(2 * a / math.pi, rel=0.01)

    def test_goal_not_reached(self):
        path = world.build_path("A")
        tip = np.array([[0.0, 0.0, z] for z in np.linspace(0, 50, 11)])
        with pytest.raises(GoalNotReached):
            nav_errors(make_log(tip), path)

    def test_mae_bounded_by_max(self, rng):
        path = world.build_path("B")
        s = np.linspace(0, 170, 60)
        pts = np.array([path.point_tangent(v)[0] for v in s])
        pts += rng.normal(scale=0.5, size=pts.shape)
        _, mae, max_ae = nav_errors(make_log(pts), path)
        assert mae <= max_ae


class TestLdj:
    def test_amplitude_invariance(self):
        v = min_jerk()
        assert abs(ldj(3.0 * v, 1e-3) - ldj(v, 1e-3)) < 1e-9

    def test_minimum_jerk_oracle(self):
        assert ldj(min_jerk(), 1e-3) == pytest.approx(MIN_JERK_LDJ, rel=0.005)

    def test_zero_profile_rejected(self):
        with pytest.raises(DegenerateProfile):
            ldj(np.zeros(100), 0.01)
        with pytest.raises(DegenerateProfile):
            ldj(np.ones(100), 0.01)       # jerk identically zero


class TestSparc:
    def test_amplitude_invariance(self):
        v = gaussian_pulse()
        assert abs(sparc(5.0 * v, 1e-3) - sparc(v, 1e-3)) < 1e-9

    def test_gaussian_pulse_oracle(self):
        assert sparc(gaussian_pulse(), 1e-3) == pytest.approx(GAUSSIAN_SPARC,
                                                              rel=0.01)

    def test_zero_mean_profile_rejected(self):
        with pytest.raises(DegenerateProfile):
            sparc(np.tile([1.0, -1.0], 8), 1e-3)

    def test_spectral_params_validation(self):
        with pytest.raises(ValueError):
            SpectralParams(amp_threshold=0.0)
        with pytest.raises(ValueError):
            SpectralParams(omega_max=-1.0)


class TestPeakCount:
    @staticmethod
    def _bumps(*amps, width=200):
        v = np.zeros(width * len(amps))
        t = np.linspace(0, np.pi, width)
        for i, a in enumerate(amps):
            v[i * width:(i + 1) * width] = a * np.sin(t)
        return v

    def test_monotone_profile_has_no_peaks(self):
        assert peak_count(np.linspace(0, 1, 100), 50.0) == 0.0

    def test_two_bumps_over_100mm(self):
        assert peak_count(self._bumps(1.0, 1.0), 100.0) == pytest.approx(0.02)

    def test_sub_prominence_bump_excluded(self):
        v = self._bumps(1.0, 0.04, 1.0)
        assert peak_count(v, 100.0) == pytest.approx(0.02)

    def test_amplitude_invariance(self):
        v = self._bumps(1.0, 0.3, 0.8)
        assert peak_count(v, 10.0) == peak_count(100.0 * v, 10.0)

    def test_positive_length_required(self):
        with pytest.raises(ValueError):
            peak_count(np.ones(10), 0.0)


def test_tip_speed_of_uniform_motion():
    tip = np.array([[0.0, 0.0, 0.5 * i] for i in range(20)])
    v = tip_speed(make_log(tip))
    assert np.allclose(v, 5.0)


def test_depth_error_series_skips_out_of_phantom_samples():
    path = world.build_path("A")
    tip = np.array([[0.0, 0.0, z] for z in np.linspace(-20, 100, 25)])
    errs = depth_error_series(make_log(tip), path)
    assert errs.size == int((tip[:, 2] >= 0).sum())
