import math

import numpy as np
import pytest

from stochtame.integrators import (
    StepperConfig,
    em_step,
    integrate_path,
    rk4_deterministic_step,
    tamed_em_step,
)
from stochtame.models import DriftOperator, FourierMultiplierDrift
from stochtame.noise import GbmSpec, NoiseSpec, WienerPath, gbm_exact
from stochtame.spectral import (
    GalerkinProjector,
    SpaceLadder,
    SpectralField,
    TorusGrid,
    random_field,
    sobolev_norm,
)

LADDER = SpaceLadder(0.0, 1.0, 2.0, 3.0)


def heat_drift(nu=1.0):
    return FourierMultiplierDrift(LADDER, lambda ksq: -nu * ksq)


def linear_drift(rate):
    return FourierMultiplierDrift(LADDER, lambda ksq: rate + 0.0 * ksq)


def sine_field(grid, amplitude=1.0):
    return SpectralField.from_physical(grid, amplitude * np.sin(grid.coordinates()[0]))


class TestSteps:
    def setup_method(self):
        self.grid = TorusGrid(1, 32)
        self.proj = GalerkinProjector(self.grid.dealias_cutoff)
        self.X = sine_field(self.grid)

    def test_zero_drift_theta_zero_fixed_point(self):
        zero = linear_drift(0.0)
        out = em_step(self.X, zero, None, 0.0, 0.1, self.proj, LADDER)
        assert np.array_equal(out.coeffs, self.X.coeffs)

    def test_scalar_linear_drift(self):
        out = em_step(self.X, linear_drift(1.0), None, 0.0, 0.01, self.proj, LADDER)
        assert np.allclose(out.coeffs, 1.01 * self.X.coeffs, rtol=1e-14)

    def test_tamed_matches_em_for_small_increments(self):
        # difference is O(dt^2 ||A||^2) by the algebraic expansion
        dt = 1e-4
        drift = heat_drift()
        a = em_step(self.X, drift, None, 0.0, dt, self.proj, LADDER)
        b = tamed_em_step(self.X, drift, None, 0.0, dt, self.proj, LADDER)
        diff = np.max(np.abs(a.coeffs - b.coeffs))
        norm_a = sobolev_norm(drift(self.X), LADDER.s_G)
        assert diff <= dt**2 * norm_a**2 * 2

    def test_tamed_noise_increment_bounded(self):
        # huge ||B||: increment magnitude <= |dW| / (dt ||B||_G)
        spec = NoiseSpec(theta=1e6, alpha=0.0, norm_space="F0", case_label="I")
        dt, dW = 1e-3, 0.37
        out = tamed_em_step(self.X, linear_drift(0.0), spec, dW, dt, self.proj, LADDER)
        incr = sobolev_norm(out - self.X, LADDER.s_G)
        bound = abs(dW) / (dt * spec.theta * sobolev_norm(self.X, LADDER.s_G))
        assert incr <= bound * (1 + 1e-12)

    def test_zero_field_fixed_point(self):
        zero_field = SpectralField.zeros(self.grid)
        spec = NoiseSpec(2.0, 1.0, "F0", "I")
        out = tamed_em_step(zero_field, heat_drift(), spec, 0.5, 0.01, self.proj, LADDER)
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_rk4_heat_single_mode_order(self):
        # exact exponential oracle exp(-k^2 dt) per mode, error O(dt^5)
        drift = heat_drift()
        for dt in (0.1, 0.05):
            out = rk4_deterministic_step(self.X, drift, dt, self.proj)
            exact = math.exp(-dt) * self.X
            err = np.max(np.abs(out.coeffs - exact.coeffs))
            assert err <= dt**5 / 10.0

    def test_rk4_steady_euler_state(self):
        # cos x + cos y is steady for the inviscid vorticity flow
        grid = TorusGrid(2, 32)
        X, Y = grid.coordinates()
        omega = SpectralField.from_physical(grid, np.cos(X) + np.cos(Y))
        model = DriftOperator("Vorticity2D")
        proj = GalerkinProjector(grid.dealias_cutoff)
        state = omega
        for _ in range(1000):
            state = rk4_deterministic_step(state, model, 1e-3, proj)
        assert np.max(np.abs(state.coeffs - omega.coeffs)) <= 1e-10


class TestGbmFieldOracle:
    def test_strong_error_halving_ratio(self):
        # one-mode field with linear drift and alpha=0 noise IS the scalar
        # geometric Brownian motion; strong error vs the exact solution
        # scales like sqrt(dt) (ratio ~ sqrt(2) under halving)
        grid = TorusGrid(1, 8)
        spec = GbmSpec(1.0, 2.0, 1.0)
        noise = NoiseSpec(theta=2.0, alpha=0.0, norm_space="F0", case_label="I")
        drift = linear_drift(1.0)
        errors = {}
        n_paths = 48
        for level, dt in ((0, 2.0**-9), (1, 2.0**-10)):
            errs = []
            for j in range(n_paths):
                wiener = WienerPath(j, 2.0**-9)
                x0 = sine_field(grid)
                st = StepperConfig(
                    scheme="TamedEulerMaruyama", dt=dt, t_end=1.0, adapt=False
                )
                # reuse the same driving path at both resolutions via bridge
                class _Shift:
                    def __init__(self, w, lvl):
                        self.w, self.lvl = w, lvl
                        self.seed = w.seed

                    def increment(self, i, level=0):
                        return self.w.increment(i, level + self.lvl)

                rec = integrate_path(x0, drift, noise, st, _Shift(wiener, level), seed=j)
                w_T = sum(wiener.increment(i, 0) for i in range(2**9))
                exact = gbm_exact(spec, w_T, 1.0) * sobolev_norm(x0, LADDER.s_F0)
                errs.append(abs(rec.norm_F0[-1] - exact))
            errors[level] = np.mean(errs)
        order = math.log2(errors[0] / errors[1])
        assert 0.3 <= order <= 0.7  # strong order 1/2 within sampling noise


class TestIntegratePath:
    def test_heat_decay_oracle(self):
        grid = TorusGrid(1, 64)
        x0 = sine_field(grid)
        st = StepperConfig(scheme="RK4Deterministic", dt=1e-3, t_end=1.0, adapt=False)
        rec = integrate_path(x0, heat_drift(), None, st)
        expect = math.exp(-1.0) * sobolev_norm(x0, 0.0)
        assert abs(rec.norm_G[-1] - expect) <= 1e-8

    def test_t_end_zero_single_row(self):
        grid = TorusGrid(1, 32)
        st = StepperConfig(dt=0.1, t_end=0.0)
        rec = integrate_path(sine_field(grid), heat_drift(), None, st)
        assert rec.n_rows == 1 and rec.status == "completed"

    def test_burgers_blowup_window(self):
        # method of characteristics: t* = -1/min(u0') = 1 for u0 = sin x
        grid = TorusGrid(1, 1024)
        x0 = sine_field(grid)
        st = StepperConfig(
            scheme="RK4Deterministic",
            dt=1e-3,
            t_end=2.0,
            blowup_threshold=10.0,
            dt_min=1e-3 * 2**-12,
            save_stride=10,
        )
        rec = integrate_path(x0, DriftOperator("Burgers1D"), None, st)
        assert rec.status == "blowup"
        assert rec.blowup is not None and 0.9 <= rec.blowup[0] <= 1.1

    def test_blowup_threshold_monotone(self):
        grid = TorusGrid(1, 1024)
        x0 = sine_field(grid)
        times = []
        for thr in (5.0, 20.0):
            st = StepperConfig(
                scheme="RK4Deterministic",
                dt=1e-3,
                t_end=2.0,
                blowup_threshold=thr,
                dt_min=1e-3 * 2**-12,
                save_stride=10,
            )
            rec = integrate_path(x0, DriftOperator("Burgers1D"), None, st)
            assert rec.status == "blowup"
            times.append(rec.blowup[0])
        assert times[0] <= times[1]

    def test_reproducible_bitwise(self):
        grid = TorusGrid(1, 64)
        x0 = sine_field(grid)
        noise = NoiseSpec(0.6, 1.0, "F0", "I")
        recs = []
        for _ in range(2):
            st = StepperConfig(scheme="TamedEulerMaruyama", dt=1e-3, t_end=0.5)
            recs.append(
                integrate_path(x0, heat_drift(), noise, st, WienerPath(5, 1e-3), seed=5)
            )
        for attr in ("times", "norm_F0", "norm_F1", "M", "QV", "int_F1sq"):
            assert np.array_equal(getattr(recs[0], attr), getattr(recs[1], attr))

    def test_galerkin_closure_and_norm_bookkeeping(self):
        grid = TorusGrid(1, 64)
        x0 = random_field(grid, 1, 4.0, 1.0, 3)
        noise = NoiseSpec(0.4, 1.0, "F0", "I")
        st = StepperConfig(
            scheme="TamedEulerMaruyama", dt=1e-3, t_end=0.2, field_stride=20, save_stride=20
        )
        rec = integrate_path(
            x0, heat_drift(), noise, st, WienerPath(9, 1e-3), cutoff=8, seed=9
        )
        ladder = LADDER
        by_time = dict(zip(rec.times, range(rec.n_rows)))
        for t_snap, field in rec.snapshots:
            assert np.max(np.abs(field.coeffs[:, grid.kinf > 8])) == 0.0
            if t_snap in by_time:
                i = by_time[t_snap]
                recomputed = sobolev_norm(field, ladder.s_F0)
                assert abs(recomputed - rec.norm_F0[i]) <= 1e-12 * max(recomputed, 1e-30)

    def test_times_strictly_increasing_and_integral_monotone(self):
        grid = TorusGrid(1, 64)
        x0 = sine_field(grid)
        noise = NoiseSpec(1.5, 1.2, "F0", "I")
        st = StepperConfig(scheme="EulerMaruyama", dt=1e-3, t_end=0.5, stiff_cap=0.05)
        rec = integrate_path(x0, heat_drift(), noise, st, WienerPath(4, 1e-3), seed=4)
        assert np.all(np.diff(rec.times) > 0)
        assert np.all(np.diff(rec.int_F1sq) >= 0)

    def test_requires_wiener_with_noise(self):
        grid = TorusGrid(1, 32)
        noise = NoiseSpec(1.0, 1.0, "F0", "I")
        st = StepperConfig(dt=0.1, t_end=0.2)
        with pytest.raises(ValueError):
            integrate_path(sine_field(grid), heat_drift(), noise, st, None)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            StepperConfig(scheme="Nope")
        with pytest.raises(ValueError):
            StepperConfig(dt=1e-3, dt_min=2e-3)
        with pytest.raises(ValueError):
            st = StepperConfig(dt=1e-3, t_end=0.1, blowup_threshold=0.1)
            grid = TorusGrid(1, 32)
            integrate_path(sine_field(grid), heat_drift(), None, st)
