import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from measctrl.quantum import (
    DimensionError,
    InvalidStateError,
    Projector,
    basis_projector,
    check_density_matrix,
    density_matrix_from_json,
    density_matrix_to_json,
    free_propagator,
    hermitian_min_eigenvalue,
    is_unitary,
    make_projector,
    measure_instantaneous,
    measure_observable,
    picture_transform,
    pure_state,
    purity,
)

from conftest import angles, density_matrices, random_density_matrix

GROUND = np.diag([1.0, 0.0]).astype(complex)


class TestMakeProjector:
    def test_zero_angles_give_ground_projector(self):
        np.testing.assert_allclose(make_projector(0.0, 0.0).matrix, GROUND, atol=1e-15)

    def test_alpha_near_pi_approaches_excited(self):
        P = make_projector(math.pi - 1e-9, 0.0).matrix
        np.testing.assert_allclose(P, np.diag([0.0, 1.0]), atol=1e-9)

    def test_equal_superposition(self):
        np.testing.assert_allclose(make_projector(math.pi / 2, 0.0).matrix, 0.5 * np.ones((2, 2)), atol=1e-15)

    @given(angles, angles)
    def test_canonical_ranges_and_same_matrix(self, a, t):
        P = make_projector(a, t)
        assert -math.pi <= P.alpha < math.pi
        assert 0.0 <= P.theta < math.pi
        np.testing.assert_allclose(P.matrix, Projector(a, t).matrix, atol=1e-12)

    @given(angles, angles)
    def test_rank_one_idempotent(self, a, t):
        P = make_projector(a, t).matrix
        np.testing.assert_allclose(P @ P, P, atol=1e-12)
        assert abs(np.trace(P) - 1.0) < 1e-12


class TestMeasureInstantaneous:
    def test_eigenstate_unchanged(self):
        np.testing.assert_allclose(measure_instantaneous(GROUND, make_projector(0, 0)), GROUND)

    def test_equal_superposition_projector_dephases(self):
        out = measure_instantaneous(GROUND, make_projector(math.pi / 2, 0.0))
        np.testing.assert_allclose(out, np.diag([0.5, 0.5]), atol=1e-15)

    def test_three_level_eigenstate(self):
        rho = basis_projector(0, 3)
        np.testing.assert_allclose(measure_instantaneous(rho, basis_projector(0, 3)), rho)

    def test_double_commutator_form(self, rng):
        rho = random_density_matrix(rng)
        P = make_projector(0.7, 1.1).matrix
        comm = lambda a, b: a @ b - b @ a
        np.testing.assert_allclose(measure_instantaneous(rho, P), rho - comm(P, comm(P, rho)), atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            measure_instantaneous(basis_projector(0, 3), make_projector(0, 0))

    @given(density_matrices(), angles, angles)
    def test_idempotent(self, rho, a, t):
        P = make_projector(a, t)
        once = measure_instantaneous(rho, P)
        np.testing.assert_allclose(measure_instantaneous(once, P), once, atol=1e-12)

    @given(density_matrices(), angles, angles)
    def test_output_valid_and_purity_not_increased(self, rho, a, t):
        out = measure_instantaneous(rho, make_projector(a, t))
        check_density_matrix(out)
        assert purity(out) <= purity(rho) + 1e-12

    @given(density_matrices(dim=3))
    def test_three_level_trace_and_hermiticity(self, rho):
        out = measure_instantaneous(rho, basis_projector(1, 3))
        assert abs(np.trace(out) - 1.0) < 1e-12
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)


class TestMeasureObservable:
    def test_full_dephasing(self):
        out = measure_observable(0.5 * np.ones((2, 2)), [basis_projector(0, 2), basis_projector(1, 2)])
        np.testing.assert_allclose(out, np.diag([0.5, 0.5]))

    def test_identity_measurement(self, rng):
        rho = random_density_matrix(rng, 3)
        np.testing.assert_allclose(measure_observable(rho, [np.eye(3)]), rho)

    def test_two_outcome_matches_instantaneous(self, rng):
        for _ in range(1000):
            rho = random_density_matrix(rng)
            P = make_projector(rng.uniform(-math.pi, math.pi), rng.uniform(0, math.pi)).matrix
            out = measure_observable(rho, [P, np.eye(2) - P])
            assert np.max(np.abs(out - measure_instantaneous(rho, P))) < 1e-12

    def test_incomplete_set_rejected(self):
        with pytest.raises(ValueError, match="identity"):
            measure_observable(GROUND, [basis_projector(0, 2)])

    def test_non_orthogonal_set_rejected(self):
        P = make_projector(math.pi / 2, 0).matrix
        with pytest.raises(ValueError):
            measure_observable(GROUND, [P, basis_projector(1, 2), np.eye(2) - P - basis_projector(1, 2)])

    @given(density_matrices(dim=3))
    def test_purity_not_increased(self, rho):
        out = measure_observable(rho, [basis_projector(k, 3) for k in range(3)])
        assert purity(out) <= purity(rho) + 1e-12


class TestPictureTransform:
    def test_zero_time_identity(self, rng):
        rho = random_density_matrix(rng)
        np.testing.assert_allclose(picture_transform(rho, [0.0, 1.3], 0.0), rho)

    def test_diagonal_state_unchanged(self):
        rho = np.diag([0.3, 0.7]).astype(complex)
        np.testing.assert_allclose(picture_transform(rho, [0.0, 2.0], 5.1), rho)

    def test_off_diagonal_phase(self):
        w, t = 1.7, 0.4
        out = picture_transform(0.5 * np.ones((2, 2)), np.diag([0.0, w]), t)
        assert out[0, 1] == pytest.approx(0.5 * np.exp(-1j * w * t), abs=1e-15)

    def test_matches_explicit_conjugation(self, rng):
        rho = random_density_matrix(rng, 3)
        H0, t = [1.0, 2.0, 3.0], 0.83
        U = free_propagator(H0, -t)
        np.testing.assert_allclose(picture_transform(rho, H0, t), U @ rho @ U.conj().T, atol=1e-15)

    def test_spectrum_preserved(self, rng):
        rho = random_density_matrix(rng, 3)
        out = picture_transform(rho, [1.0, 2.0, 3.0], 2.2)
        np.testing.assert_allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(rho), atol=1e-14)

    def test_non_diagonal_hamiltonian_rejected(self):
        with pytest.raises(ValueError):
            picture_transform(GROUND, np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)

    def test_non_finite_time_rejected(self):
        with pytest.raises(ValueError):
            picture_transform(GROUND, [0.0, 1.0], math.inf)


class TestPurityAndValidation:
    def test_purity_values(self):
        assert purity(pure_state([0.6, 0.8j])) == pytest.approx(1.0)
        assert purity(np.diag([0.5, 0.5])) == pytest.approx(0.5)
        assert purity(np.eye(3) / 3) == pytest.approx(1.0 / 3.0)

    def test_min_eigenvalue_closed_form(self, rng):
        for dim in (2, 3):
            for _ in range(50):
                G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                H = G + G.conj().T
                assert hermitian_min_eigenvalue(H) == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-10)

    def test_rejects_bad_states(self):
        with pytest.raises(InvalidStateError):
            check_density_matrix(np.array([[1.0, 0.1], [0.2, 0.0]]))
        with pytest.raises(InvalidStateError):
            check_density_matrix(np.diag([0.7, 0.7]))
        with pytest.raises(InvalidStateError):
            check_density_matrix(np.diag([1.1, -0.1]))
        with pytest.raises(DimensionError):
            check_density_matrix(np.eye(4) / 4)

    def test_tolerates_tiny_negativity(self):
        check_density_matrix(np.diag([1.0 + 5e-10, -5e-10]))

    def test_unitarity(self):
        assert is_unitary(free_propagator([1.0, 2.0, 3.0], 0.7))
        assert not is_unitary(np.diag([1.0, 0.5]))

    def test_json_round_trip(self, rng):
        rho = random_density_matrix(rng, 3)
        text = json.dumps(density_matrix_to_json(rho))
        np.testing.assert_array_equal(density_matrix_from_json(json.loads(text)), rho)
