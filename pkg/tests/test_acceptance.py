"""End-to-end acceptance checks for the simulator and control stack.

Each class pins one externally checkable property of the system: centering
convergence, the damping/overshoot trade-off, navigation safety across all
tube paths, agreement of the core numerics with independent oracles,
smoothness-metric calibration, and bitwise determinism of every artifact.
"""

import json
import math
import time

import numpy as np
import pytest

from lumen_servo.config import ExperimentConfig
from lumen_servo.control import (ControlParams, ErrorVector, JacobianEstimate,
                                 estimate_jacobian, potential_gradient,
                                 potential_value, resolved_rates)
from lumen_servo.harness import (generate_dataset, run_centering,
                                 run_navigation, save_run)
from lumen_servo.metrics import ldj, ntr, peak_count, sparc
from lumen_servo.perception import Mask, centroid

CENTER = np.array([319.5, 239.5])
MIN_JERK_LDJ = -math.log(204.8)
GAUSSIAN_SPARC = -1.4164144018054254


# -- shared expensive runs ----------------------------------------------------


@pytest.fixture(scope="module")
def centering_run():
    cfg = ExperimentConfig(experiment="centering", n_trials=20)
    t0 = time.perf_counter()
    results, reports, agg = run_centering(cfg)
    return results, reports, agg, time.perf_counter() - t0


@pytest.fixture(scope="module")
def undamped_run():
    cfg = ExperimentConfig(experiment="centering", n_trials=20,
                           control=ControlParams(damping=0.0))
    results, reports, _ = run_centering(cfg)
    return results, reports


@pytest.fixture(scope="module")
def navigation_runs():
    out, wall = {}, 0.0
    for path_id in "ABCD":
        cfg = ExperimentConfig(experiment="navigation", path_id=path_id,
                               n_trials=5)
        t0 = time.perf_counter()
        out[path_id] = run_navigation(cfg)
        wall += time.perf_counter() - t0
    return out, wall


# -- centering ----------------------------------------------------------------


class TestCentering:
    def test_all_trials_complete(self, centering_run):
        results, _, _, _ = centering_run
        assert [r.status for r in results] == ["Completed"] * 20

    def test_initial_error_is_large(self, centering_run):
        results, _, _, _ = centering_run
        assert all(r.log.rho[0] >= 320.0 for r in results)

    def test_every_trial_reaches_the_response_band(self, centering_run):
        results, _, _, _ = centering_run
        for res in results:
            rhon = ntr(res.log, CENTER).rhon
            assert np.any(np.abs(rhon - 1.0) <= 0.1), res.trial_id

    def test_steady_state_error_small_in_19_of_20(self, centering_run):
        _, reports, _, _ = centering_run
        good = sum(rep.sse <= 10.0 for rep in reports)
        assert good >= 19

    def test_wall_time_under_budget(self, centering_run):
        *_, wall = centering_run
        assert wall < 60.0


class TestOvershoot:
    @staticmethod
    def _max_overshoots(results, reports):
        out = []
        for res, rep in zip(results, reports):
            out.append(0.0 if rep is None else max(rep.os_x, rep.os_y))
        return np.asarray(out)

    def test_undamped_majority_overshoots(self, undamped_run):
        os_vals = self._max_overshoots(*undamped_run)
        assert np.count_nonzero(os_vals > 0.0) >= 10

    def test_damping_reduces_mean_overshoot(self, undamped_run, centering_run):
        undamped = self._max_overshoots(*undamped_run)
        damped = self._max_overshoots(centering_run[0], centering_run[1])
        assert damped.mean() < undamped.mean()


# -- navigation ---------------------------------------------------------------


class TestNavigation:
    def test_all_trials_complete_without_collision(self, navigation_runs):
        runs, _ = navigation_runs
        for path_id, (results, reports, _) in runs.items():
            assert [r.status for r in results] == ["Completed"] * 5, path_id
            assert not any(rep.collided for rep in reports), path_id

    def test_tracking_error_bounds(self, navigation_runs):
        runs, _ = navigation_runs
        for path_id, (_, reports, _) in runs.items():
            for rep in reports:
                assert rep.mae <= 2.5, (path_id, rep.mae)
                assert rep.max_ae <= 6.5, (path_id, rep.max_ae)

    def test_completion_time_orders_by_path_difficulty(self, navigation_runs):
        runs, _ = navigation_runs
        mean_ct = {p: np.mean([rep.ct for rep in reports])
                   for p, (_, reports, _) in runs.items()}
        assert mean_ct["A"] < mean_ct["B"]
        assert mean_ct["C"] < mean_ct["D"]

    def test_wall_time_under_budget(self, navigation_runs):
        _, wall = navigation_runs
        assert wall < 300.0


# -- independent numeric oracles ----------------------------------------------


class TestOracleEquivalence:
    def test_centroid_equals_brute_force_moments(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            h, w = rng.integers(2, 24, 2)
            px = (rng.random((h, w)) < rng.uniform(0.05, 0.9)).astype(np.uint8)
            if not px.any():
                px[rng.integers(h), rng.integers(w)] = 1
            m00 = m10 = m01 = 0
            for row in range(h):
                for col in range(w):
                    if px[row, col]:
                        m00 += 1
                        m10 += col
                        m01 += row
            c = centroid(Mask(px))
            assert c[0] == m10 / m00 and c[1] == m01 / m00

    def test_jacobian_estimate_matches_quarter_step_oracle(self):
        rng = np.random.default_rng(7)
        step = ControlParams().jac_step
        for _ in range(50):
            A = rng.uniform(1.0, 3.0, (2, 3)) * rng.choice([-1, 1], (2, 3))
            B = rng.uniform(0.0, 0.3, (2, 3))
            C = rng.uniform(0.0, 2.0, (2, 3))
            D = rng.uniform(0.0, 2 * np.pi, (2, 3))

            def f(q, A=A, B=B, C=C, D=D):
                q = np.asarray(q, dtype=float)
                return A @ q + (B * np.sin(C * q + D)).sum(axis=1)

            q0 = rng.uniform(-1.0, 1.0, 3)
            est = estimate_jacobian(f, q0, step).J
            h = step / 4
            oracle = np.empty((2, 3))
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                oracle[:, j] = (f(q0 + e) - f(q0 - e)) / (2 * h)
            for j in range(3):
                scale = max(np.linalg.norm(oracle[:, j]), 1e-12)
                err = np.linalg.norm(est[:, j] - oracle[:, j]) / scale
                assert err <= 0.05, (j, err)

    @pytest.mark.parametrize("variant", ["standard", "paper-literal"])
    def test_potential_gradient_matches_fd_of_potential(self, variant):
        params = ControlParams(potential=variant)
        h = 1e-4
        for rho in (1.0, 5.0, 24.0, 26.0, 40.0, 120.0):
            g = potential_gradient(
                ErrorVector(np.array([rho, 0.0])), params)
            fd = (potential_value(rho + h, params)
                  - potential_value(rho - h, params)) / (2 * h)
            assert abs(np.linalg.norm(g) - fd) < 1e-6

    def test_pseudoinverse_satisfies_moore_penrose_identity(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            J = rng.normal(scale=rng.uniform(0.1, 10), size=(2, 3))
            pinv = np.linalg.pinv(J, rcond=1e-8)
            assert np.max(np.abs(J @ pinv @ J - J)) < 1e-8
            # resolved_rates applies exactly this pseudoinverse
            v = rng.normal(size=2)
            qd = resolved_rates(JacobianEstimate(J), v, centering=False)
            np.testing.assert_allclose(qd, pinv @ v, atol=1e-12)


# -- smoothness metrics -------------------------------------------------------


def min_jerk(dt=1e-3):
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    return 30 * (t ** 2 - 2 * t ** 3 + t ** 4)


def gaussian_pulse(dt=1e-3):
    t = np.arange(0.0, 2.0, dt)
    return np.exp(-0.5 * ((t - 1.0) / 0.2) ** 2)


class TestSmoothness:
    def test_amplitude_invariance_exact(self):
        v = gaussian_pulse()
        assert abs(ldj(7.5 * v, 1e-3) - ldj(v, 1e-3)) < 1e-9
        assert abs(sparc(7.5 * v, 1e-3) - sparc(v, 1e-3)) < 1e-9

    def test_min_jerk_ldj_matches_analytic_value(self):
        assert ldj(min_jerk(), 1e-3) == pytest.approx(MIN_JERK_LDJ, rel=0.005)

    def test_gaussian_sparc_matches_oracle(self):
        assert sparc(gaussian_pulse(), 1e-3) == pytest.approx(GAUSSIAN_SPARC,
                                                              rel=0.01)

    def test_white_noise_degrades_ldj(self):
        v = min_jerk()
        clean = ldj(v, 1e-3)
        worse = sum(ldj(v + np.random.default_rng(s).normal(
            scale=0.02 * v.max(), size=v.size), 1e-3) < clean
            for s in range(20))
        assert worse >= 16

    def test_band_noise_degrades_sparc(self):
        v = gaussian_pulse()
        t = np.arange(v.size) * 1e-3
        clean = sparc(v, 1e-3)
        worse = 0
        for s in range(20):
            rng = np.random.default_rng(s)
            noise = sum(0.08 * np.sin(2 * np.pi * f * t
                                      + rng.uniform(0, 2 * np.pi))
                        for f in rng.uniform(3.0, 10.0, 4))
            worse += sparc(v + noise, 1e-3) < clean
        assert worse >= 16

    def test_peak_count_examples(self):
        # monotone profile: no peaks
        assert peak_count(np.linspace(0, 1, 200), 50.0) == 0.0
        # two clear bumps over 100 mm travelled
        t = np.linspace(0, np.pi, 200)
        bump = np.sin(t)
        two = np.concatenate([bump, bump])
        assert peak_count(two, 100.0) == pytest.approx(0.02)
        # a bump below the prominence threshold does not count
        small = np.concatenate([bump, 0.04 * bump])
        assert peak_count(small, 100.0) == pytest.approx(0.01)


# -- determinism --------------------------------------------------------------


def _tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestDeterminism:
    def _save(self, cfg, outdir, runner):
        results, reports, agg = runner(cfg)
        save_run(outdir, cfg, results, reports, agg)

    def test_centering_artifacts_are_byte_identical(self, tmp_path):
        cfg = ExperimentConfig(experiment="centering", n_trials=2)
        self._save(cfg, tmp_path / "a", run_centering)
        self._save(cfg, tmp_path / "b", run_centering)
        assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")

    def test_navigation_artifacts_are_byte_identical(self, tmp_path):
        cfg = ExperimentConfig(experiment="navigation", path_id="A",
                               n_trials=1)
        self._save(cfg, tmp_path / "a", run_navigation)
        self._save(cfg, tmp_path / "b", run_navigation)
        assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")

    def test_dataset_is_byte_identical(self, tmp_path):
        cfg = ExperimentConfig(experiment="dataset", dataset_count=6,
                               dataset_image_size=48, rng_seed=17)
        generate_dataset(cfg, tmp_path / "a")
        generate_dataset(cfg, tmp_path / "b")
        assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")
        index = json.loads((tmp_path / "a" / "index.json").read_text())
        assert index["count"] == 6
