import numpy as np
import pytest
from scipy import integrate

from matsubara_pimd.errors import ConvergenceError
from matsubara_pimd.estimators import get_observable
from matsubara_pimd.oracle import (
    SpectralConfig,
    _thermal,
    classical_average,
    classical_radial_bin_masses,
    classical_radial_density,
    default_spectral_config,
    hermite_quadrature,
    quantum_average_1d,
    quantum_spectrum_1d,
)
from matsubara_pimd.potentials import PotentialSpec, builtin_potential

from reference import finite_difference_average

HARMONIC = builtin_potential("harmonic")
MODEL = builtin_potential("model1d")
SPHERE = builtin_potential("spherical3d")
Q2 = get_observable("q2")
SIN = get_observable("sinhalfpi")


def test_harmonic_q2():
    assert quantum_average_1d(HARMONIC, Q2, 2.0) == pytest.approx(0.5 / np.tanh(1.0), abs=1e-8)


def test_harmonic_spectrum():
    e, _ = quantum_spectrum_1d(HARMONIC)
    np.testing.assert_allclose(e[:20], np.arange(20) + 0.5, atol=1e-10)


def test_identity_and_parity():
    for pot in (HARMONIC, MODEL):
        assert quantum_average_1d(pot, get_observable("one"), 1.3) == pytest.approx(1.0, abs=1e-12)
    assert abs(quantum_average_1d(HARMONIC, SIN, 2.0)) <= 1e-10
    assert abs(quantum_average_1d(HARMONIC, get_observable("position"), 0.7)) <= 1e-10


def test_model_against_finite_differences():
    spectral = quantum_average_1d(MODEL, SIN, 1.0)

    def v(x):
        return 0.5 * x * x + x * np.cos(x)

    fd = finite_difference_average(v, lambda x: np.sin(0.5 * np.pi * x), 1.0)
    assert spectral == pytest.approx(fd, abs=1e-6)


def test_model_values_are_stable():
    # Frozen from the spectral oracle after the finite-difference cross-check.
    expected = {1.0: -0.2364363574658642, 2.0: -0.2932498591961289}
    for beta, value in expected.items():
        assert quantum_average_1d(MODEL, SIN, beta) == pytest.approx(value, abs=1e-9)


def test_high_temperature_limit():
    beta = 0.05
    quantum = quantum_average_1d(HARMONIC, Q2, beta)
    classical = classical_average(HARMONIC, Q2, beta)
    assert classical == pytest.approx(1 / beta, rel=1e-10)
    assert quantum == pytest.approx(classical, rel=0.02)
    # Exact harmonic value (1/2) coth(beta/2) ~ 1/beta + beta/12.
    assert quantum == pytest.approx(0.5 / np.tanh(beta / 2), rel=1e-6)


def test_doubling_converges_monotonically():
    cfg = SpectralConfig(basis_size=24)
    vals = []
    for _ in range(4):
        vals.append(_thermal(MODEL, SIN, 2.0, cfg))
        cfg = cfg.doubled()
    deltas = np.abs(np.diff(vals))
    assert deltas[-1] < 1e-8
    assert np.all(deltas[1:] <= deltas[:-1] + 1e-12)


def test_convergence_failure_reports_history():
    with pytest.raises(ConvergenceError) as info:
        quantum_average_1d(MODEL, SIN, 0.05, cfg=SpectralConfig(basis_size=4), max_doublings=1)
    assert len(info.value.history) == 2


def test_oracle_argument_errors():
    with pytest.raises(ValueError):
        quantum_average_1d(SPHERE, Q2, 1.0)
    with pytest.raises(ValueError):
        quantum_average_1d(HARMONIC, Q2, 0.0)
    with pytest.raises(ValueError):
        SpectralConfig(basis_size=1)
    with pytest.raises(ValueError):
        SpectralConfig(basis_size=10, quad_points=5)
    with pytest.raises(ValueError):
        SpectralConfig(scale=0.0)


def test_default_config_grows_at_high_temperature():
    assert default_spectral_config(2.0).basis_size == 48
    assert default_spectral_config(0.05).basis_size >= 600


def test_hermite_quadrature_orthonormal():
    _, a = hermite_quadrature(80, 40)
    np.testing.assert_allclose(a.T @ a, np.eye(40), atol=1e-12)


def test_classical_averages():
    for beta in (0.5, 2.0):
        assert classical_average(HARMONIC, Q2, beta) == pytest.approx(1 / beta, rel=1e-10)
        assert classical_average(MODEL, get_observable("one"), beta) == pytest.approx(1.0, rel=1e-12)
    # Radial: harmonic in 3D has <|q|^2> = 3 / beta.
    h3 = builtin_potential("harmonic", dim=3)
    assert classical_average(h3, Q2, 2.0) == pytest.approx(1.5, rel=1e-10)


def test_classical_model_against_trapezoid():
    x = np.linspace(-15, 15, 300_001)
    w = np.exp(-2.0 * (0.5 * x * x + x * np.cos(x)))
    direct = integrate.trapezoid(np.sin(0.5 * np.pi * x) * w, x) / integrate.trapezoid(w, x)
    assert classical_average(MODEL, SIN, 2.0) == pytest.approx(direct, abs=1e-9)


def test_classical_radial_density_normalized():
    total, _ = integrate.quad(lambda r: classical_radial_density(SPHERE, 4.0, r)[0], 0, np.inf,
                              limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)
    edges = np.linspace(0, 6, 61)
    assert classical_radial_bin_masses(SPHERE, 4.0, edges).sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_classical_divergent_normalizer():
    flat = PotentialSpec(1, lambda q: np.zeros(q.shape[:-1]), lambda q: np.zeros_like(q))
    with pytest.raises(ValueError):
        classical_average(flat, Q2, 1.0)
