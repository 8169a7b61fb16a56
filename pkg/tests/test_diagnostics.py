import numpy as np
import pytest

from kvwave import (
    EnergyRecord,
    EnergyTrace,
    discrete_h1_seminorm,
    discrete_l2_norm,
    dissipation_increment,
    energy_identity_residual,
    fit_exponential,
    fit_polynomial,
    kinetic_energy,
    potential_energy_explicit,
    potential_energy_implicit,
    sample_cell_averages,
)
from kvwave.diagnostics import layer_energies, total_energy

DT = 0.025


def kinetic_oracle(u_curr, u_next, widths, dt):
    total = 0.0
    for i in range(len(widths)):
        total += 0.5 * widths[i] * ((u_next[i] - u_curr[i]) / dt) ** 2
    return total


def potential_explicit_oracle(u_curr, u_next, ell):
    uc = np.concatenate([[0.0], u_curr, [0.0]])
    un = np.concatenate([[0.0], u_next, [0.0]])
    total = 0.0
    for i in range(len(ell)):
        total += 0.5 * ell[i] * (un[i + 1] - un[i]) * (uc[i + 1] - uc[i])
    return total


def potential_implicit_oracle(u_curr, u_next, ell):
    uc = np.concatenate([[0.0], u_curr, [0.0]])
    un = np.concatenate([[0.0], u_next, [0.0]])
    total = 0.0
    for i in range(len(ell)):
        total += 0.25 * ell[i] * (un[i + 1] - un[i]) ** 2
        total += 0.25 * ell[i] * (uc[i + 1] - uc[i]) ** 2
    return total


def dissipation_oracle(u_prev, u_next, mesh, delta, dt):
    up = np.concatenate([[0.0], u_prev, [0.0]])
    un = np.concatenate([[0.0], u_next, [0.0]])
    h = mesh.h
    total = 0.0
    for i in range(mesh.n_alpha + 1, mesh.n_alpha + mesh.n_damp):
        jump_next = un[i + 1] - un[i]
        jump_prev = up[i + 1] - up[i]
        total -= delta * dt * h * ((jump_next - jump_prev) / (2.0 * dt * h)) ** 2
    return total


class TestKineticEnergy:
    def test_equal_layers(self, base_mesh, rng):
        u = rng.standard_normal(base_mesh.n_max)
        assert kinetic_energy(u, u.copy(), base_mesh, DT) == 0.0

    def test_unit_rate_gives_half_length(self, base_mesh, rng):
        u = rng.standard_normal(base_mesh.n_max)
        assert kinetic_energy(u, u + DT, base_mesh, DT) == pytest.approx(1.5, rel=1e-12)

    def test_matches_brute_force(self, base_mesh, rng):
        u, v = rng.standard_normal((2, base_mesh.n_max))
        expected = kinetic_oracle(u, v, base_mesh.cell_widths, DT)
        assert kinetic_energy(u, v, base_mesh, DT) == pytest.approx(expected, rel=1e-13)


class TestPotentialEnergy:
    def test_zero_layers(self, base_mesh, base_ell):
        z = np.zeros(base_mesh.n_max)
        assert potential_energy_explicit(z, z, base_ell) == 0.0
        assert potential_energy_implicit(z, z, base_ell) == 0.0

    def test_equal_layers_give_half_squared_seminorm(self, base_mesh, base_ell, rng):
        u = rng.standard_normal(base_mesh.n_max)
        half_sq = 0.5 * discrete_h1_seminorm(u, base_ell) ** 2
        assert potential_energy_explicit(u, u, base_ell) == pytest.approx(half_sq, rel=1e-13)
        assert potential_energy_implicit(u, u, base_ell) == pytest.approx(half_sq, rel=1e-13)

    def test_matches_brute_force(self, base_mesh, base_ell, rng):
        u, v = rng.standard_normal((2, base_mesh.n_max))
        assert potential_energy_explicit(u, v, base_ell) == pytest.approx(
            potential_explicit_oracle(u, v, base_ell.ell), rel=1e-12
        )
        assert potential_energy_implicit(u, v, base_ell) == pytest.approx(
            potential_implicit_oracle(u, v, base_ell.ell), rel=1e-12
        )

    def test_implicit_nonnegative(self, base_mesh, base_ell, rng):
        for _ in range(25):
            u, v = rng.standard_normal((2, base_mesh.n_max))
            assert potential_energy_implicit(u, v, base_ell) >= 0.0


class TestDissipation:
    def test_undamped_is_zero(self, base_mesh, rng):
        p = base_params_zero_delta()
        u, v = rng.standard_normal((2, base_mesh.n_max))
        assert dissipation_increment(u, v, base_mesh, p, DT) == 0.0

    def test_equal_outer_layers_cancel(self, base_mesh, base_params, rng):
        u = rng.standard_normal(base_mesh.n_max)
        assert dissipation_increment(u, u.copy(), base_mesh, base_params, DT) == 0.0

    def test_matches_brute_force(self, base_mesh, base_params, rng):
        u, v = rng.standard_normal((2, base_mesh.n_max))
        expected = dissipation_oracle(u, v, base_mesh, base_params.delta, DT)
        assert dissipation_increment(u, v, base_mesh, base_params, DT) == pytest.approx(
            expected, rel=1e-12
        )
        assert dissipation_increment(u, v, base_mesh, base_params, DT) <= 0.0


def base_params_zero_delta():
    from kvwave import Parameters

    return Parameters(1, 1, 1, 0.0, 1.0, 2.0, 3.0, 10.0)


class TestIdentityResidual:
    def _record(self, variant, step, e_total, dissipation):
        return EnergyRecord(
            variant=variant, step=step, t=step * DT, e_kinetic=0.1, e_potential=0.1,
            e_total=e_total, dissipation=dissipation, residual=0.0,
        )

    def test_value(self):
        prev = self._record("explicit", 4, 1.0, 0.0)
        curr = self._record("explicit", 5, 0.9, -0.1)
        assert energy_identity_residual(prev, curr) == pytest.approx(0.0, abs=1e-15)

    def test_variant_mismatch_rejected(self):
        prev = self._record("explicit", 4, 1.0, 0.0)
        curr = self._record("implicit", 5, 0.9, -0.1)
        with pytest.raises(ValueError):
            energy_identity_residual(prev, curr)

    def test_nonconsecutive_rejected(self):
        prev = self._record("explicit", 4, 1.0, 0.0)
        curr = self._record("explicit", 6, 0.9, -0.1)
        with pytest.raises(ValueError):
            energy_identity_residual(prev, curr)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            EnergyRecord("explicit", 0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            EnergyRecord("implicit", 0, 0.0, 0.1, -0.1, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            EnergyRecord("leapfrog", 0, 0.0, 0.1, 0.1, 0.2, 0.0, 0.0)


class TestNorms:
    def test_constant_l2(self, base_mesh):
        ones = np.ones(base_mesh.n_max)
        assert discrete_l2_norm(ones, base_mesh) == pytest.approx(np.sqrt(3.0), rel=1e-13)

    def test_zero_vector(self, base_mesh, base_ell):
        z = np.zeros(base_mesh.n_max)
        assert discrete_l2_norm(z, base_mesh) == 0.0
        assert discrete_h1_seminorm(z, base_ell) == 0.0

    def test_sine_against_continuous_values(self, base_mesh, base_ell):
        length = 3.0
        samples = sample_cell_averages(lambda x: np.sin(np.pi * x / length), base_mesh)
        l2 = discrete_l2_norm(samples.values, base_mesh)
        assert abs(l2 - np.sqrt(length / 2.0)) / np.sqrt(length / 2.0) < 0.01
        seminorm = discrete_h1_seminorm(samples.values, base_ell)
        continuous = np.sqrt(np.pi**2 / (2.0 * length))  # unit speeds
        assert abs(seminorm - continuous) / continuous < 0.02

    def test_l2_bounded_by_continuous_norm(self, base_mesh):
        # cell averaging contracts the continuous norm
        length = 3.0
        samples = sample_cell_averages(lambda x: np.sin(np.pi * x / length), base_mesh)
        assert discrete_l2_norm(samples.values, base_mesh) <= np.sqrt(length / 2.0) + 1e-12


class TestLayerEnergies:
    def test_matches_scalar_functions(self, base_mesh, base_ell, base_params, rng):
        layers = rng.standard_normal((6, base_mesh.n_max))
        for variant in ("explicit", "implicit"):
            e_k, e_p, e_tot, diss, res = layer_energies(
                layers, base_mesh, base_ell, base_params, DT, variant
            )
            assert len(e_k) == 5 and len(diss) == 4
            for j in range(5):
                ek_j, ep_j, et_j = total_energy(
                    layers[j], layers[j + 1], base_mesh, base_ell, DT, variant
                )
                assert e_k[j] == pytest.approx(ek_j, rel=1e-13, abs=1e-15)
                assert e_p[j] == pytest.approx(ep_j, rel=1e-13, abs=1e-15)
                assert e_tot[j] == pytest.approx(et_j, rel=1e-13, abs=1e-15)
            for j in range(4):
                d_j = dissipation_increment(
                    layers[j], layers[j + 2], base_mesh, base_params, DT
                )
                assert diss[j] == pytest.approx(d_j, rel=1e-12, abs=1e-15)
                r_j = (e_tot[j + 1] - e_tot[j]) - d_j
                assert res[j] == pytest.approx(r_j, rel=1e-12, abs=1e-14)


def synthetic_trace(t, e):
    n = len(t)
    zeros = np.zeros(n)
    return EnergyTrace(
        variant="explicit", step=np.arange(n), t=np.asarray(t, dtype=float),
        e_kinetic=zeros, e_potential=zeros, e_total=np.asarray(e, dtype=float),
        dissipation=zeros.copy(), residual=zeros.copy(),
    )


class TestFits:
    def test_exponential_exact(self):
        t = np.linspace(0.0, 1000.0, 200)
        trace = synthetic_trace(t, np.exp(-0.01 * t))
        fit = fit_exponential(trace, (0.0, 1000.0))
        assert abs(fit.rate - 0.01) <= 1e-10
        assert fit.residual <= 1e-10

    def test_polynomial_exact(self):
        t = np.linspace(1.0, 1000.0, 200)
        trace = synthetic_trace(t, t**-4.0)
        fit = fit_polynomial(trace, (1.0, 1000.0))
        assert abs(fit.rate - 4.0) <= 1e-10

    def test_rescaling_leaves_rate_unchanged(self):
        t = np.linspace(10.0, 500.0, 64)
        e = np.exp(-0.37 * t)
        base = fit_exponential(synthetic_trace(t, e), (10.0, 500.0))
        scaled = fit_exponential(synthetic_trace(t, 123.456 * e), (10.0, 500.0))
        assert scaled.rate == pytest.approx(base.rate, rel=1e-12)
        assert scaled.intercept != pytest.approx(base.intercept, rel=1e-3)
        p_base = fit_polynomial(synthetic_trace(t, t**-2.5), (10.0, 500.0))
        p_scaled = fit_polynomial(synthetic_trace(t, 9.5 * t**-2.5), (10.0, 500.0))
        assert p_scaled.rate == pytest.approx(p_base.rate, rel=1e-12)

    def test_window_selection(self):
        t = np.linspace(0.0, 100.0, 101)
        e = np.exp(-0.1 * t)
        fit = fit_exponential(synthetic_trace(t, e), (50.0, 100.0))
        assert fit.n_samples == 51
        assert fit.t_lo == 50.0 and fit.t_hi == 100.0

    def test_too_few_samples(self):
        t = np.linspace(0.0, 100.0, 101)
        trace = synthetic_trace(t, np.exp(-t / 30.0))
        with pytest.raises(ValueError, match="samples"):
            fit_exponential(trace, (95.0, 100.0))

    def test_nonpositive_energy_rejected(self):
        t = np.linspace(0.0, 10.0, 20)
        e = np.ones(20)
        e[5] = 0.0
        with pytest.raises(ValueError, match="onpositive"):
            fit_exponential(synthetic_trace(t, e), (0.0, 10.0))

    def test_polynomial_needs_positive_start(self):
        t = np.linspace(0.0, 10.0, 20)
        with pytest.raises(ValueError, match="t > 0"):
            fit_polynomial(synthetic_trace(t, np.ones(20)), (0.0, 10.0))

    def test_bad_window_ordering(self):
        t = np.linspace(0.0, 10.0, 20)
        with pytest.raises(ValueError, match="window"):
            fit_exponential(synthetic_trace(t, np.ones(20)), (5.0, 5.0))
