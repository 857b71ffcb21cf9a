import numpy as np
import pytest

from stochtame.models import (
    AssumptionConstants,
    DriftOperator,
    FourierMultiplierDrift,
    ModelParams,
    biot_savart,
    burgers_drift,
    curl,
    default_ladder,
    dissipation_term,
    divergence,
    drift_pairing_report,
    lipschitz_quotient,
    rsw_drift,
    vorticity_drift,
)
from stochtame.spectral import (
    SpaceLadder,
    SpectralField,
    TorusGrid,
    dealias,
    galerkin_project,
    GalerkinProjector,
    inner_product,
    random_field,
    sobolev_norm,
)


def sine_field(grid, amplitude=1.0):
    x = grid.coordinates()[0]
    vals = amplitude * np.sin(x)
    if grid.dim > 1:
        vals = vals + np.zeros((grid.n,) * grid.dim)
    return SpectralField.from_physical(grid, vals)


class TestBurgers:
    def test_constant_field_zero_drift(self):
        grid = TorusGrid(1, 32)
        c = SpectralField.zeros(grid)
        c.coeffs[0, 0] = 2.5
        out = burgers_drift(c, nu=0.3)
        assert np.max(np.abs(out.coeffs)) < 1e-15

    def test_sin_closed_form(self):
        # -sin x cos x = -(1/2) sin 2x by symbolic differentiation
        grid = TorusGrid(1, 64)
        u = sine_field(grid)
        out = burgers_drift(u, nu=0.0)
        expected = SpectralField.from_physical(grid, -0.5 * np.sin(2 * grid.coordinates()[0]))
        assert np.max(np.abs(out.coeffs - expected.coeffs)) < 1e-14

    def test_energy_pairing_quadrature_oracle(self):
        # int u^2 u_x dx = 0 by periodic integration by parts; quadrature check
        grid = TorusGrid(1, 128)
        for seed in range(5):
            u = dealias(random_field(grid, 1, 3.5, 1.0, seed))
            out = burgers_drift(u, nu=0.0)
            pairing = inner_product(u, out, 0.0)
            uphys = u.to_physical()[0]
            ux = np.gradient(uphys, 2 * np.pi / grid.n, edge_order=2)
            quad = -np.mean(uphys**2 * ux)
            assert abs(pairing) <= max(1e-10, 10 * abs(quad) + 1e-10)
            assert abs(pairing) <= 1e-10 * sobolev_norm(u, 0.0) ** 2 + 1e-14

    def test_2d_burgers_components(self):
        grid = TorusGrid(2, 32)
        u = random_field(grid, 2, 4.5, 0.5, 3)
        out = burgers_drift(u, nu=0.1)
        assert out.components == 2
        assert out.is_finite()


class TestBiotSavart:
    def test_zero(self):
        grid = TorusGrid(2, 16)
        u = biot_savart(SpectralField.zeros(grid))
        assert np.max(np.abs(u.coeffs)) == 0.0

    def test_sin_x_closed_form(self):
        # streamfunction psi = -sin x gives u = (0, -cos x)
        grid = TorusGrid(2, 32)
        X, _ = grid.coordinates()
        omega = SpectralField.from_physical(grid, np.sin(X) + np.zeros((grid.n, grid.n)))
        u = biot_savart(omega)
        uphys = u.to_physical()
        assert np.max(np.abs(uphys[0])) < 1e-13
        assert np.max(np.abs(uphys[1] + np.cos(X) + np.zeros((grid.n, grid.n)))) < 1e-13

    def test_divergence_free_and_curl_identity(self):
        grid = TorusGrid(2, 32)
        for seed in range(5):
            omega = random_field(grid, 1, 4.0, 1.0, seed, zero_mean=True)
            u = biot_savart(omega)
            scale = np.max(np.abs(omega.coeffs))
            assert np.max(np.abs(divergence(u).coeffs)) <= 1e-12 * scale
            assert np.max(np.abs(curl(u).coeffs - omega.coeffs)) <= 1e-12 * scale

    def test_3d_round_trip(self):
        grid = TorusGrid(3, 16)
        from stochtame.models import _leray_project

        omega = _leray_project(random_field(grid, 3, 5.0, 1.0, 7, zero_mean=True))
        omega.coeffs[:, 0, 0, 0] = 0.0
        u = biot_savart(omega)
        scale = np.max(np.abs(omega.coeffs))
        assert np.max(np.abs(divergence(u).coeffs)) <= 1e-12 * scale
        assert np.max(np.abs(curl(u).coeffs - omega.coeffs)) <= 1e-11 * scale

    def test_3d_rejects_divergent_input(self):
        grid = TorusGrid(3, 8)
        bad = random_field(grid, 3, 5.0, 1.0, 9)
        with pytest.raises(ValueError):
            biot_savart(bad)


class TestVorticity:
    def test_zero(self):
        grid = TorusGrid(2, 16)
        assert np.max(np.abs(vorticity_drift(SpectralField.zeros(grid)).coeffs)) == 0.0

    def test_sin_x_advection_vanishes(self):
        # u = (0, -cos x) gives u . grad omega = 0; viscous part = -nu sin x
        grid = TorusGrid(2, 32)
        X, _ = grid.coordinates()
        omega = SpectralField.from_physical(grid, np.sin(X) + np.zeros((grid.n, grid.n)))
        out = vorticity_drift(omega, nu=0.7)
        expected = SpectralField.from_physical(
            grid, -0.7 * np.sin(X) + np.zeros((grid.n, grid.n))
        )
        assert np.max(np.abs(out.coeffs - expected.coeffs)) < 1e-13

    def test_laplacian_eigenfunction_is_steady_euler(self):
        # omega = cos x + cos y has psi proportional to omega: Jacobian vanishes
        grid = TorusGrid(2, 32)
        X, Y = grid.coordinates()
        omega = SpectralField.from_physical(grid, np.cos(X) + np.cos(Y))
        out = vorticity_drift(omega, nu=0.0)
        assert np.max(np.abs(out.coeffs)) < 1e-12

    def test_enstrophy_conservation(self):
        grid = TorusGrid(2, 32)
        for seed in range(5):
            omega = dealias(random_field(grid, 1, 4.0, 1.0, seed, zero_mean=True))
            pairing = inner_product(omega, vorticity_drift(omega, 0.0), 0.0)
            assert abs(pairing) <= 1e-10 * sobolev_norm(omega, 0.0) ** 2


class TestRsw:
    def make_state(self, grid, seed=0, amp=0.3):
        f = random_field(grid, 3, 5.0, amp, seed)
        f.coeffs[2, 0, 0] = 1.0
        return f

    def test_rest_state(self):
        grid = TorusGrid(2, 16)
        state = SpectralField.zeros(grid, 3)
        state.coeffs[2, 0, 0] = 1.0  # constant height
        out = rsw_drift(state, ModelParams(), viscous=False)
        assert np.max(np.abs(out.coeffs)) < 1e-15

    def test_mass_conservation(self):
        grid = TorusGrid(2, 32)
        for seed in range(5):
            state = self.make_state(grid, seed)
            out = rsw_drift(state, ModelParams(nu=0.1, eta=0.1), viscous=True)
            assert abs(complex(out.coeffs[2, 0, 0])) <= 1e-12

    def test_geostrophic_balance(self):
        # constructed balanced state: f zhat x u = -grad p with div u = 0,
        # so the momentum tendency reduces to -(u.grad)u
        grid = TorusGrid(2, 32)
        params = ModelParams(f_coriolis=1.3, rossby=0.8, froude=1.1)
        psi = random_field(grid, 1, 5.0, 0.3, 21, zero_mean=True)
        k = grid.k_axes
        u_coeffs = np.stack([-1j * k[1] * psi.coeffs[0], 1j * k[0] * psi.coeffs[0]])
        # grad p = -f zhat x u => p_hat solves ik p = -f (-u2, u1)
        ksq = grid.ksq.copy()
        ksq[0, 0] = 1.0
        zc = np.stack([-u_coeffs[1], u_coeffs[0]])
        rhs = -params.f_coriolis * zc
        p_hat = (-1j) * (k[0] * rhs[0] + k[1] * rhs[1]) / ksq
        h_hat = p_hat * (params.rossby * params.froude)
        h_hat[0, 0] = 1.0
        state = SpectralField(grid, np.concatenate([u_coeffs, h_hat[np.newaxis]]))
        out = rsw_drift(state, params, viscous=False)
        u_field = SpectralField(grid, u_coeffs)
        from stochtame.models import advective_term

        expected_mom = -1.0 * advective_term(u_field, u_field)
        diff = np.max(np.abs(out.coeffs[0:2] - expected_mom.coeffs))
        assert diff <= 1e-10 * max(np.max(np.abs(out.coeffs)), 1.0)

    def test_height_positivity_warning(self):
        grid = TorusGrid(2, 16)
        state = SpectralField.zeros(grid, 3)
        state.coeffs[2, 0, 0] = -0.5
        model = DriftOperator("RSW_Inviscid")
        assert model.check_state(state) == ["height_nonpositive"]


class TestDriftOperator:
    def test_kind_validation(self):
        with pytest.raises(ValueError):
            DriftOperator("NotAModel")
        with pytest.raises(ValueError):
            DriftOperator("RSW_Inviscid", ModelParams(nu=0.1))

    def test_default_ladders_follow_catalogue(self):
        assert default_ladder("Burgers1D") == SpaceLadder(0.0, 1.0, 3.0, 4.0)
        assert default_ladder("RSW_Viscous") == SpaceLadder(0.0, 1.0, 2.0, 3.0)
        assert default_ladder("Vorticity3D", ModelParams(nu=1.0)) == SpaceLadder(
            0.0, 2.0, 3.0, 4.0
        )
        euler = default_ladder("Vorticity3D", ModelParams(nu=0.0, epsilon_sobolev=0.1))
        assert euler.s_F0 == pytest.approx(1.6)

    def test_component_checks(self):
        grid = TorusGrid(2, 16)
        model = DriftOperator("Burgers2D")
        with pytest.raises(Exception):
            model(SpectralField.zeros(grid, 1))

    def test_band_limited_closure(self):
        # the projected drift of a band-limited state is band-limited
        grid = TorusGrid(1, 128)
        model = DriftOperator("Burgers1D")
        proj = GalerkinProjector(10)
        u = galerkin_project(random_field(grid, 1, 3.5, 1.0, 31), proj)
        out = galerkin_project(model(u), proj)
        outside = out.coeffs[:, grid.kinf > 10]
        assert np.max(np.abs(outside)) == 0.0

    def test_viscosity_dissipation_decomposition(self):
        # exact algebra: adding nu shifts the F0 self-pairing by -nu * D(a)
        grid = TorusGrid(2, 32)
        base = DriftOperator("Vorticity2D")
        viscous = base.with_viscosity(0.8)
        lad = viscous.ladder
        for seed in range(4):
            a = dealias(random_field(grid, 1, 4.5, 1.0, seed, zero_mean=True))
            p0 = inner_product(a, base(a), lad.s_F0)
            p1 = inner_product(a, viscous(a), lad.s_F0)
            expected = p0 - 0.8 * dissipation_term(a, lad.s_F0)
            assert p1 == pytest.approx(expected, rel=1e-10, abs=1e-12)
            assert dissipation_term(a, lad.s_F0) > 0


class TestReports:
    def test_zero_field_all_zero(self):
        model = DriftOperator("Burgers1D")
        grid = TorusGrid(1, 64)
        rep = drift_pairing_report(SpectralField.zeros(grid), model)
        assert rep.pair_F0 == 0.0 and rep.pair_D == 0.0 and rep.norm_A_G == 0.0

    def test_burgers_sine_energy_pairing_exact_zero(self):
        model = DriftOperator("Burgers1D")
        grid = TorusGrid(1, 64)
        rep = drift_pairing_report(sine_field(grid), model)
        assert abs(rep.pair_G) < 1e-14

    def test_lipschitz_quotient_finite(self):
        model = DriftOperator("Burgers1D")
        grid = TorusGrid(1, 64)
        a = random_field(grid, 1, 4.5, 1.0, 41)
        b = random_field(grid, 1, 4.5, 1.0, 42)
        q = lipschitz_quotient(model, a, b)
        assert np.isfinite(q) and q >= 0


def test_fourier_multiplier_linear_drift():
    grid = TorusGrid(1, 32)
    lad = SpaceLadder(0.0, 1.0, 2.0, 3.0)
    heat = FourierMultiplierDrift(lad, lambda ksq: -ksq)
    f = sine_field(grid)
    out = heat(f)
    # Laplacian of sin is -sin (k^2 weights amplify high-mode rounding)
    assert np.max(np.abs(out.coeffs + f.coeffs)) < 1e-13
