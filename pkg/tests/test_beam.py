import numpy as np
import pytest
import scipy.linalg as sla
from dataclasses import replace

from ilf import beam
from ilf.beam import (
    BeamModel,
    analytical_modes,
    assemble_beam,
    calibrate_section,
    exact_frf,
    modal_basis,
    modal_model,
    simulate_step_response,
    step_modal_response,
)


def _plane_rows(system, direction):
    return sorted(i for (node, d, kind), i in system.dof_map.items() if d == direction)


class TestModel:
    @pytest.mark.parametrize("field,value", [
        ("length_m", 0.0), ("youngs_modulus_pa", -1.0), ("density_kg_m3", 0.0),
        ("area_m2", 0.0), ("I_y_m4", 0.0), ("I_z_m4", -1e-8),
    ])
    def test_non_positive_rejected(self, field, value):
        with pytest.raises(ValueError, match=field):
            BeamModel(**{field: value})

    @pytest.mark.parametrize("n", [0, 2.5])
    def test_bad_element_count(self, n):
        with pytest.raises(ValueError):
            BeamModel(n_elements=n)

    def test_damping_range(self):
        with pytest.raises(ValueError):
            BeamModel(modal_damping=1.0)


class TestAssembly:
    def test_default_has_32_free_dofs(self, beam_system):
        assert beam_system.M.shape == beam_system.K.shape == (32, 32)
        assert beam_system.n_dof == 32

    def test_symmetric(self, beam_system):
        assert np.linalg.norm(beam_system.M - beam_system.M.T) == 0
        assert np.linalg.norm(beam_system.K - beam_system.K.T) == 0

    def test_positive_definite(self, beam_system):
        assert np.all(np.linalg.eigvalsh(beam_system.M) > 0)
        assert np.all(np.linalg.eigvalsh(beam_system.K) > 0)

    def test_planes_decoupled(self, beam_system):
        y, z = _plane_rows(beam_system, "y"), _plane_rows(beam_system, "z")
        for A in (beam_system.M, beam_system.K):
            assert np.linalg.norm(A[np.ix_(y, z)]) == 0
            assert np.linalg.norm(A[np.ix_(z, y)]) == 0

    def test_single_element_cantilever_coefficient(self):
        model = BeamModel(n_elements=1, I_y_m4=1e-7, I_z_m4=1e-7)
        w, _ = modal_basis(assemble_beam(model))
        EI = model.youngs_modulus_pa * model.I_z_m4
        rhoA = model.density_kg_m3 * model.area_m2
        lam_L = (w[0] ** 2 * rhoA / EI) ** 0.25 * model.length_m
        assert abs(lam_L / 1.8751 - 1) < 5e-3

    def test_doubling_E(self):
        model = BeamModel(I_y_m4=1e-7, I_z_m4=4e-8)
        a = assemble_beam(model)
        b = assemble_beam(replace(model, youngs_modulus_pa=2 * model.youngs_modulus_pa))
        np.testing.assert_array_equal(b.K, 2 * a.K)
        np.testing.assert_array_equal(b.M, a.M)

    def test_frequencies_scale_with_sqrt_E(self):
        model = BeamModel(I_y_m4=1e-7, I_z_m4=4e-8)
        fa = analytical_modes(assemble_beam(model)).frequencies_hz
        fb = analytical_modes(assemble_beam(replace(model, youngs_modulus_pa=2 * model.youngs_modulus_pa))).frequencies_hz
        np.testing.assert_allclose(fb / fa, np.sqrt(2), rtol=1e-12)

    def test_dof_map_excludes_root(self, beam_system):
        assert all(node >= 1 for node, _, _ in beam_system.dof_map)
        assert len(beam_system.dof_map) == 32


class TestCalibration:
    def test_reference_targets(self, beam_system, analytical):
        f = analytical.frequencies_hz
        assert abs(f[0] / beam.REFERENCE_F1_HZ - 1) < 1e-4
        assert abs(f[1] / beam.REFERENCE_F2_HZ - 1) < 1e-4

    def test_equal_targets_equal_inertia(self):
        _, I_y, I_z = calibrate_section(20.0, 20.0)
        assert I_y == pytest.approx(I_z, rel=1e-8)

    def test_targets_order(self):
        with pytest.raises(ValueError):
            calibrate_section(30.0, 20.0)

    def test_unreachable_target(self):
        with pytest.raises(ValueError, match="bracketed"):
            calibrate_section(1e7, 1e7)

    def test_reference_area_kept(self):
        area, _, _ = calibrate_section(14.277, 26.132, area_m2=5e-4)
        assert area == 5e-4


class TestAnalyticalModes:
    def test_count(self, analytical):
        assert len(analytical) == 32

    def test_sixteen_below_400(self, analytical):
        # the published mode list has 16 entries up to 377.839 Hz
        assert len(analytical.in_band(0.0, 400.0)) == 16

    def test_m_orthonormal(self, beam_system):
        _, phi = modal_basis(beam_system)
        np.testing.assert_allclose(phi.T @ beam_system.M @ phi, np.eye(32), atol=1e-10)

    def test_rayleigh_quotient(self, beam_system):
        w, phi = modal_basis(beam_system)
        K, M = beam_system.K, beam_system.M
        for n in range(32):
            q = phi[:, n] @ K @ phi[:, n] / (phi[:, n] @ M @ phi[:, n])
            assert q == pytest.approx(w[n] ** 2, rel=1e-10)

    def test_damping_and_shapes(self, analytical):
        np.testing.assert_allclose(analytical.damping_ratios, 0.03, rtol=1e-12)
        assert analytical[0].shape.size == 16


class TestStepResponse:
    def test_zero_amplitude(self, beam_system):
        th = simulate_step_response(beam_system, [(1, "y", 0.0), (1, "z", 0.0)], n_samples=1024)
        assert np.all(th.outputs == 0)

    def test_channels_and_rate(self, step_runs):
        th = step_runs[0]
        assert th.outputs.shape == (16, 2**16)
        assert th.inputs.shape == (2, 2**16)
        assert th.fs_hz == 800.0
        np.testing.assert_array_equal(th.inputs[0], 1.0)
        np.testing.assert_array_equal(th.inputs[1], 0.0)

    def test_settles_to_static_deflection(self, beam_system):
        th = simulate_step_response(beam_system, [(1, "y", 1.0), (3, "z", 2.0)], n_samples=2**16, max_mode_hz=np.inf)
        F = np.zeros(32)
        F[beam_system.dof_map[(1, "y", "translation")]] = 1.0
        F[beam_system.dof_map[(3, "z", "translation")]] = 2.0
        static = np.linalg.solve(beam_system.K, F)[beam_system.translation_index()]
        final = th.outputs[:, -1]
        assert np.linalg.norm(final - static) <= 1e-3 * np.linalg.norm(static)

    def test_single_mode_closed_form(self):
        w, zeta, p = 2 * np.pi * 5.0, 0.03, 2.0
        t = np.linspace(0, 3, 500)
        wd = w * np.sqrt(1 - zeta**2)
        expected = p / w**2 * (1 - np.exp(-zeta * w * t) * (np.cos(wd * t) + zeta / np.sqrt(1 - zeta**2) * np.sin(wd * t)))
        np.testing.assert_allclose(step_modal_response(p, w, zeta, t)[0], expected, rtol=1e-10, atol=1e-16)

    def test_single_retained_mode_matches_formula(self, beam_system):
        w, phi = modal_basis(beam_system)
        f1 = w[0] / (2 * np.pi)
        th = simulate_step_response(beam_system, [(8, "y", 1.0)], n_samples=1024, max_mode_hz=f1 * 1.01)
        i_in = beam_system.dof_map[(8, "y", "translation")]
        q = step_modal_response(phi[i_in, 0], w[0], 0.03, th.time)[0]
        np.testing.assert_allclose(th.outputs, np.outer(phi[beam_system.translation_index(), 0], q), rtol=1e-10, atol=1e-18)

    def test_clamped_node_rejected(self, beam_system):
        with pytest.raises(ValueError, match="clamped"):
            simulate_step_response(beam_system, [(0, "y", 1.0)], n_samples=256)

    def test_power_of_two(self, beam_system):
        with pytest.raises(ValueError):
            simulate_step_response(beam_system, n_samples=1000)


class TestExactFrf:
    def test_static_limit(self, beam_system):
        H = beam.receptance(beam_system, [0.0])[:, :, 0]
        inv = np.linalg.inv(beam_system.K)
        out = beam_system.translation_index()
        cols = [beam_system.dof_map[(1, d, "translation")] for d in ("y", "z")]
        np.testing.assert_allclose(H, inv[np.ix_(out, cols)], rtol=1e-10, atol=1e-10 * np.abs(inv).max())

    def test_reciprocity(self, beam_system):
        inputs = [(1, "y"), (5, "y"), (3, "z")]
        frf = exact_frf(beam_system, np.linspace(1, 300, 50), inputs)
        labels = frf.output_labels
        for a, (na, da) in enumerate(inputs):
            for b, (nb, db) in enumerate(inputs):
                ia, ib = labels.index(f"n{na}{da}"), labels.index(f"n{nb}{db}")
                np.testing.assert_allclose(frf.values[ib, a], frf.values[ia, b], rtol=1e-12, atol=1e-20)

    def test_modal_model_equivalent(self, beam_system, exact_band_frf):
        model = modal_model(beam_system)
        np.testing.assert_allclose(model.frf(exact_band_frf.freqs_hz).values, exact_band_frf.values,
                                   rtol=1e-10, atol=1e-14 * np.abs(exact_band_frf.values).max())

    def test_kind_and_labels(self, exact_band_frf):
        assert exact_band_frf.estimator_kind.value == "exact"
        assert exact_band_frf.values.shape == (16, 2, 400)
        assert exact_band_frf.input_labels == ("F_n1y", "F_n1z")
