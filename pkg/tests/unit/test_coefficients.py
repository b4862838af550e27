"""Tests for coefficient models and degeneracy analysis."""

import numpy as np
import pytest

from gradflow_lab.core.exceptions import ConfigurationError, DegenerateCoefficientError
from gradflow_lab.models.coefficients import (
    AnisotropicModel,
    CustomModel,
    IsotropicModel,
    MCFModel,
    PLaplacianModel,
    ScalarFunction,
)
from gradflow_lab.services.anisotropy_service import build_anisotropy
from gradflow_lab.services.coefficient_service import (
    barrier_existence,
    coefficients,
    degeneracy_alpha,
    degeneracy_profile,
    divergence_criterion,
    ellipticity_constants,
)


class TestCoefficientModels:
    """Tests for the coefficient matrices."""

    def test_mcf_matrix(self):
        """Test a(p) = I - p p^T / (1 + |p|^2)."""
        p = np.array([1.0, 2.0])
        a, b = coefficients(MCFModel(2), p)
        np.testing.assert_allclose(a, np.eye(2) - np.outer(p, p) / 6.0)
        assert b == 0.0

    def test_euclidean_anisotropy_is_mcf(self, rng):
        """Test that the Euclidean norm with unit mobility reproduces mean curvature flow."""
        model = AnisotropicModel(build_anisotropy("euclidean", 2))
        p = rng.standard_normal((200, 2)) * 5.0
        np.testing.assert_allclose(model.matrix(p), MCFModel(2).matrix(p), atol=1e-12)

    def test_plaplacian_eigenvalues(self):
        """Test eigenvalues (p-1)|q|^{p-2} along q and |q|^{p-2} across."""
        q = np.array([3.0, 4.0])
        a = PLaplacianModel(2, 3.0).matrix(q)
        unit = q / 5.0
        assert unit @ a @ unit == pytest.approx(2.0 * 5.0)
        across = np.array([-unit[1], unit[0]])
        assert across @ a @ across == pytest.approx(5.0)

    def test_plaplacian_p2_is_heat(self, rng):
        p = rng.standard_normal((10, 3))
        expected = np.broadcast_to(np.eye(3), (10, 3, 3))
        np.testing.assert_allclose(PLaplacianModel(3, 2.0).matrix(p), expected)

    def test_plaplacian_zero_gradient_limit(self):
        """Test the isotropic limit at q = 0."""
        singular = PLaplacianModel(1, 1.5, epsilon=0.01).matrix(np.zeros(1))
        assert singular[0, 0] == pytest.approx(0.5 * 0.01**-0.5)
        assert PLaplacianModel(1, 3.0).matrix(np.zeros(1))[0, 0] == 0.0

    def test_plaplacian_rejects_small_exponent(self):
        with pytest.raises(ConfigurationError):
            PLaplacianModel(1, 1.0)

    def test_isotropic_model(self):
        """Test the alpha/beta split along and across the gradient."""
        model = IsotropicModel(
            2, ScalarFunction("curvature", 2.0), ScalarFunction("constant", 2.0)
        )
        a = model.matrix(np.array([1.0, 0.0]))
        np.testing.assert_allclose(a, np.diag([1.0, 2.0]))
        np.testing.assert_allclose(model.matrix(np.zeros(2)), 2.0 * np.eye(2))

    def test_isotropic_requires_matching_origin(self):
        with pytest.raises(ConfigurationError):
            IsotropicModel(1, ScalarFunction("constant", 1.0), ScalarFunction("constant", 2.0))

    def test_custom_constant(self):
        model = CustomModel.constant([[2.0, 0.0], [0.0, 1.0]], drift=0.5)
        a, b = coefficients(model, np.ones((4, 2)))
        assert a.shape == (4, 2, 2)
        np.testing.assert_allclose(b, 0.5)

    def test_wrong_gradient_length(self):
        with pytest.raises(ConfigurationError):
            coefficients(MCFModel(2), np.ones(3))

    def test_energy_densities(self):
        p = np.array([[3.0, 4.0]])
        np.testing.assert_allclose(MCFModel(2).energy_density(p), [np.sqrt(26.0)])
        np.testing.assert_allclose(PLaplacianModel(2, 3.0).energy_density(p), [125.0 / 3.0])
        np.testing.assert_allclose(PLaplacianModel(2, 2.0).energy_density(p), [12.5])
        euclidean = AnisotropicModel(build_anisotropy("euclidean", 2))
        np.testing.assert_allclose(euclidean.energy_density(p), [np.sqrt(26.0)])


class TestDegeneracy:
    """Tests for the degeneracy scalar and ellipticity constants."""

    @pytest.mark.parametrize("radius", [0.0, 0.5, 3.0, 100.0])
    def test_mcf_alpha(self, radius):
        assert degeneracy_alpha(MCFModel(2), radius) == pytest.approx(1.0 / (1.0 + radius**2))

    def test_sampled_alpha_matches_closed_form(self):
        """Test the sampled infimum against the Euclidean closed form."""
        model = AnisotropicModel(build_anisotropy("euclidean", 2))
        assert degeneracy_alpha(model, 2.0) == pytest.approx(0.2, rel=1e-3)

    def test_degenerate_alpha_raises(self):
        with pytest.raises(DegenerateCoefficientError):
            degeneracy_alpha(PLaplacianModel(1, 3.0), 0.0)

    def test_mcf_ellipticity_constants(self):
        """Test that alpha R^2 = R^2 / (1 + R^2) saturates near one."""
        a0, threshold = ellipticity_constants(MCFModel(1), 1e3)
        assert 0.98 <= a0 <= 1.0
        assert 5.0 <= threshold <= 20.0

    def test_growing_floor(self):
        a0, threshold = ellipticity_constants(PLaplacianModel(1, 3.0), 1e3)
        assert threshold == 1.0
        assert a0 == pytest.approx(2.0)

    def test_degeneracy_profile_holds(self):
        profile = degeneracy_profile(MCFModel(1), 1e3)
        assert profile.holds()
        assert profile.to_dict()["a0"] == pytest.approx(profile.a0)

    def test_divergence_criterion(self):
        assert divergence_criterion(MCFModel(1))["divergent"]

    def test_barrier_existence(self):
        """Test the decay exponent of the smallest eigenvalue."""
        mcf = barrier_existence(MCFModel(2), holder_exponent=0.5)
        assert mcf["decay_exponent"] == pytest.approx(2.0, abs=0.01)
        assert mcf["bounded_data"] and mcf["holder_data"]
        assert barrier_existence(PLaplacianModel(2, 3.0))["decay_exponent"] == 0.0
