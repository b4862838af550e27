"""Tests for domains, stencils and snapshot I/O."""

import numpy as np
import pytest

from gradflow_lab.core.exceptions import DomainError
from gradflow_lab.models.grid import BoundaryCondition, DomainSpec, GridFunction, LatticeSpec
from gradflow_lab.services.evolution_service import sine_wave
from gradflow_lab.services.grid_service import (
    apply_boundary_condition,
    derivative_fields,
    elliptic_contraction,
    gradient,
    gradient_field,
    hessian,
    load_binary,
    load_csv,
    minimal_image,
    minimal_image_batch,
    oscillation,
    save_binary,
    save_csv,
)


class TestDomainSpec:
    """Tests for DomainSpec construction and geometry."""

    def test_periodic_shape_and_spacing(self, periodic_2d):
        """Test that periodic cells have one sample per resolution step."""
        assert periodic_2d.shape == (16, 16)
        assert periodic_2d.h_max == pytest.approx(1.0 / 16)
        assert periodic_2d.max_pair_distance() == pytest.approx(0.5 * np.sqrt(2.0))

    def test_rectangle_includes_faces(self, dirichlet_square):
        """Test that rectangles sample both faces."""
        assert dirichlet_square.shape == (17, 17)
        interior = dirichlet_square.interior_mask()
        assert not interior[0, 5] and not interior[-1, 5]
        assert interior[1:-1, 1:-1].all()

    def test_neumann_rectangle_updates_faces(self, neumann_square):
        assert neumann_square.interior_mask().all()

    def test_disk_masks(self, unit_disk):
        """Test the interior and ghost ring of a disk."""
        interior = unit_disk.interior_mask()
        ring = unit_disk.ring_mask()
        assert not np.any(interior & ring)
        assert unit_disk.sample_mask().sum() == interior.sum() + ring.sum()
        assert unit_disk.contains([0.5, 0.0])
        assert not unit_disk.contains([1.0, 0.0])

    def test_invalid_domains(self):
        """Test rejected geometries."""
        with pytest.raises(DomainError):
            DomainSpec.unit_periodic(2, 4)
        with pytest.raises(DomainError):
            DomainSpec.periodic([[1.0, 0.0], [2.0, 0.0]], [16, 16])
        with pytest.raises(DomainError):
            DomainSpec.rectangle([0.0], [0.0], [16])
        with pytest.raises(DomainError):
            DomainSpec.rectangle([0.0], [1.0], [16], BoundaryCondition.PERIODIC)

    def test_round_trip_dict(self, unit_disk):
        assert DomainSpec.from_dict(unit_disk.to_dict()) == unit_disk


class TestGridFunction:
    """Tests for GridFunction invariants."""

    def test_dirichlet_boundary_must_vanish(self, dirichlet_interval):
        values = np.ones(dirichlet_interval.shape)
        with pytest.raises(DomainError):
            GridFunction(dirichlet_interval, values)

    def test_rejects_non_finite(self, periodic_1d):
        values = np.zeros(periodic_1d.shape)
        values[3] = np.nan
        with pytest.raises(DomainError):
            GridFunction(periodic_1d, values)

    def test_scaled(self, periodic_1d):
        u = sine_wave(periodic_1d)
        assert oscillation(u.scaled(3.0)) == pytest.approx(3.0 * oscillation(u))


class TestMinimalImage:
    """Tests for lattice minimal images."""

    def test_unit_square(self):
        """Test that displacements wrap to the nearest translate."""
        lattice = LatticeSpec(((1.0, 0.0), (0.0, 1.0)), (16, 16))
        image = minimal_image([0.1, 0.1], [0.9, 0.2], lattice)
        np.testing.assert_allclose(image, [-0.2, 0.1], atol=1e-12)

    def test_tie_breaks_lexicographically(self):
        """Test that the lexicographically first translate wins a tie."""
        lattice = LatticeSpec(((1.0,),), (16,))
        image = minimal_image([0.0], [0.5], lattice)
        np.testing.assert_allclose(image, [-0.5])

    def test_batch_matches_scalar_on_skew_lattice(self, rng):
        """Test the vectorised version on a sheared lattice."""
        lattice = LatticeSpec(((1.0, 0.0), (0.6, 0.8)), (16, 16))
        displacements = rng.uniform(-1.5, 1.5, (50, 2))
        batch = minimal_image_batch(displacements, lattice)
        for d, image in zip(displacements, batch):
            expected = minimal_image(np.zeros(2), d, lattice)
            assert np.linalg.norm(image) == pytest.approx(np.linalg.norm(expected), abs=1e-12)

    def test_batch_ties_match_scalar(self):
        """Test that half-cell displacements pick the same translate in both versions."""
        lattice = LatticeSpec(((1.0, 0.0), (0.0, 1.0)), (16, 16))
        displacements = np.array([[0.5, 0.0], [-0.5, 0.5], [0.5, 0.5], [1.5, -0.5]])
        batch = minimal_image_batch(displacements, lattice)
        for d, image in zip(displacements, batch):
            np.testing.assert_allclose(image, minimal_image(np.zeros(2), d, lattice), atol=1e-12)
        np.testing.assert_allclose(batch[0], [-0.5, 0.0], atol=1e-12)
        np.testing.assert_allclose(batch[1], [-0.5, -0.5], atol=1e-12)

    def test_antisymmetric_off_ties(self, rng):
        """Test that swapping the points negates the image on a sheared lattice."""
        lattice = LatticeSpec(((1.0, 0.0), (0.6, 0.8)), (16, 16))
        points = rng.uniform(0.0, 1.0, (20, 2, 2)) @ lattice.matrix
        for x, y in points:
            np.testing.assert_allclose(
                minimal_image(x, y, lattice), -minimal_image(y, x, lattice), atol=1e-12
            )
        forward = minimal_image_batch(points[:, 1] - points[:, 0], lattice)
        backward = minimal_image_batch(points[:, 0] - points[:, 1], lattice)
        np.testing.assert_allclose(forward, -backward, atol=1e-12)


class TestStencils:
    """Tests for finite-difference derivatives."""

    def test_periodic_sine_derivatives(self, periodic_1d):
        """Test second-order accuracy of the central differences."""
        u = sine_wave(periodic_1d)
        gradient, hessian = derivative_fields(u.values, periodic_1d)
        x = periodic_1d.coordinates()[..., 0]
        np.testing.assert_allclose(gradient[..., 0], 2 * np.pi * np.cos(2 * np.pi * x), atol=0.05)
        np.testing.assert_allclose(
            hessian[..., 0, 0], -4 * np.pi**2 * np.sin(2 * np.pi * x), atol=0.3
        )

    def test_skew_lattice_linear_field(self):
        """Test that a linear field has its exact gradient on a sheared lattice."""
        domain = DomainSpec.periodic([[1.0, 0.0], [0.5, 1.0]], [16, 16])
        x = domain.coordinates()
        # periodic on the lattice: k . x with k in the dual lattice
        k = 2 * np.pi * np.linalg.inv(domain.lattice.matrix).T @ np.array([1.0, 0.0])
        values = np.sin(x @ k)
        gradient, _ = derivative_fields(values, domain)
        expected = np.cos(x @ k)[..., None] * k
        np.testing.assert_allclose(gradient, expected, atol=0.25)

    def test_gradient_field_one_sided_at_faces(self, dirichlet_interval):
        """Test exact gradients of a quadratic up to the faces."""
        x = dirichlet_interval.coordinates()[..., 0]
        u = GridFunction(dirichlet_interval, x * (1.0 - x))
        np.testing.assert_allclose(gradient_field(u)[..., 0], 1.0 - 2.0 * x, atol=1e-10)

    def test_pointwise_gradient_and_hessian(self, dirichlet_interval):
        x = dirichlet_interval.coordinates()[..., 0]
        u = GridFunction(dirichlet_interval, x * (1.0 - x))
        assert gradient(u, (8,))[0] == pytest.approx(1.0 - 2.0 * x[8])
        assert hessian(u, (8,))[0, 0] == pytest.approx(-2.0)
        with pytest.raises(IndexError):
            hessian(u, (0,))
        with pytest.raises(IndexError):
            gradient(u, (0, 0))


class TestEllipticContraction:
    """Tests for the sign-selected second-order operator."""

    @staticmethod
    def quadratic(domain: DomainSpec) -> np.ndarray:
        x = domain.coordinates()
        return x[..., 0] ** 2 + 3.0 * x[..., 0] * x[..., 1] + 2.0 * x[..., 1] ** 2

    @pytest.mark.parametrize(
        "matrix,expected,dominant",
        [
            ([[1.0, 0.4], [0.4, 1.0]], 8.4, True),
            ([[1.0, -0.6], [-0.6, 2.0]], 6.4, True),
            ([[1.0, 2.0], [2.0, 5.0]], 34.0, False),
        ],
    )
    def test_exact_on_quadratics(self, dirichlet_square, matrix, expected, dominant):
        """Test a^{ij} D_ij u = tr(A D^2 u) for u with Hessian [[2, 3], [3, 4]]."""
        matrices = np.broadcast_to(np.array(matrix), dirichlet_square.shape + (2, 2))
        result, monotone = elliptic_contraction(
            self.quadratic(dirichlet_square), dirichlet_square, matrices
        )
        np.testing.assert_allclose(result[1:-1, 1:-1], expected, rtol=1e-9)
        assert np.all(monotone == dominant)

    def test_neighbour_weights_are_nonnegative(self, periodic_2d):
        """Test that a unit spike only raises the operator at its neighbours."""
        values = np.zeros(periodic_2d.shape)
        values[8, 8] = 1.0
        matrices = np.broadcast_to(np.array([[1.0, -0.6], [-0.6, 1.0]]), (16, 16, 2, 2))
        result, monotone = elliptic_contraction(values, periodic_2d, matrices)
        assert monotone.all()
        result[8, 8] = 0.0
        assert np.all(result >= -1e-12)
        assert result[9, 7] > 0.0 and result[9, 9] == 0.0

    def test_sheared_lattice_laplacian(self):
        domain = DomainSpec.periodic([[1.0, 0.0], [0.5, 1.0]], [32, 32])
        x = domain.coordinates()
        k = 2 * np.pi * np.linalg.inv(domain.lattice.matrix).T @ np.array([1.0, 0.0])
        values = np.sin(x @ k)
        matrices = np.broadcast_to(np.eye(2), domain.shape + (2, 2))
        result, monotone = elliptic_contraction(values, domain, matrices)
        assert monotone.all()
        np.testing.assert_allclose(result, -(k @ k) * values, atol=0.02 * (k @ k))


class TestBoundaryConditions:
    """Tests for boundary re-imposition."""

    def test_dirichlet_zeroes_boundary(self, dirichlet_square):
        values = apply_boundary_condition(np.ones(dirichlet_square.shape), dirichlet_square)
        assert values[0].sum() == 0.0 and values[:, -1].sum() == 0.0
        assert values[5, 5] == 1.0

    def test_periodic_is_untouched(self, periodic_2d, rng):
        values = rng.standard_normal(periodic_2d.shape)
        np.testing.assert_array_equal(apply_boundary_condition(values, periodic_2d), values)

    def test_neumann_disk_ghosts_copy_interior(self):
        domain = DomainSpec.disk([0.0, 0.0], 1.0, 32, BoundaryCondition.NEUMANN)
        values = apply_boundary_condition(np.full(domain.shape, 2.0), domain)
        assert np.all(values[domain.ring_mask()] == 2.0)


class TestSnapshotIO:
    """Tests for CSV and binary snapshots."""

    def test_csv_round_trip(self, unit_disk, tmp_path):
        """Test that a CSV snapshot restores every sample and the time stamp."""
        r = np.linalg.norm(unit_disk.coordinates(), axis=-1)
        values = np.where(unit_disk.interior_mask(), 1.0 - r * r, 0.0)
        u = GridFunction(unit_disk, values, 0.25)
        rows = save_csv(u, tmp_path / "u.csv")
        assert rows == int(unit_disk.sample_mask().sum())
        restored = load_csv(tmp_path / "u.csv", unit_disk)
        assert restored.time == 0.25
        np.testing.assert_array_equal(restored.values, u.values)

    def test_binary_round_trip(self, periodic_2d, rng, tmp_path):
        u = GridFunction(periodic_2d, rng.standard_normal(periodic_2d.shape), 1.5)
        save_binary(u, tmp_path / "u.bin")
        restored = load_binary(tmp_path / "u.bin", periodic_2d)
        np.testing.assert_array_equal(restored.values, u.values)

    def test_shape_mismatch(self, periodic_2d, tmp_path):
        save_csv(GridFunction(periodic_2d, np.zeros(periodic_2d.shape)), tmp_path / "u.csv")
        with pytest.raises(DomainError):
            load_csv(tmp_path / "u.csv", DomainSpec.unit_periodic(2, 32))
