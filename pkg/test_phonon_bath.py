import numpy as np
import pytest
from scipy.integrate import simpson

from tools.errors import DomainError
from tools.phonon_bath.phonon_bath import (
    OMEGA_CUTOFF_SCALE,
    PhononBath,
    PhononBathParams,
    correlation_function,
    correlation_integrand,
    green_functions,
    mean_displacement,
    phonon_hash,
    polaron_validity,
    polaron_validity_report,
    spectral_density,
)

OMEGA_B = 1.5193


@pytest.fixture(scope="module")
def bath():
    return PhononBath(PhononBathParams())


def test_params_validation():
    with pytest.raises(DomainError):
        PhononBathParams(alpha_p=-0.01)
    with pytest.raises(DomainError):
        PhononBathParams(omega_b=0.0)
    with pytest.raises(DomainError):
        PhononBathParams(temperature=-1.0)


def test_spectral_density_examples():
    params = PhononBathParams(omega_b=OMEGA_B)
    assert spectral_density(0.0, params) == 0.0
    assert spectral_density(OMEGA_B, params) == pytest.approx(0.0638, abs=5e-5)
    no_coupling = PhononBathParams(alpha_p=0.0)
    np.testing.assert_array_equal(spectral_density(np.linspace(0, 10, 11), no_coupling), 0.0)
    with pytest.raises(DomainError):
        spectral_density(-0.1, params)


def test_mean_displacement_at_4k():
    assert mean_displacement(PhononBathParams()) == pytest.approx(0.95, abs=0.005)


def test_mean_displacement_limits():
    assert mean_displacement(PhononBathParams(alpha_p=0.0)) == 1.0
    zero_t = PhononBathParams(omega_b=OMEGA_B, temperature=0.0)
    assert mean_displacement(zero_t) == pytest.approx(np.exp(-0.03 * OMEGA_B ** 2 / 2.0), rel=1e-8)
    assert mean_displacement(zero_t) == pytest.approx(0.9659, abs=1e-4)


def test_mean_displacement_decreases_with_temperature_and_coupling():
    temperatures = [0.0, 2.0, 4.2, 10.0, 20.0]
    values = [mean_displacement(PhononBathParams(temperature=t)) for t in temperatures]
    assert all(a > b for a, b in zip(values, values[1:]))

    couplings = [0.01, 0.02, 0.03, 0.06, 0.12]
    values = [mean_displacement(PhononBathParams(alpha_p=a)) for a in couplings]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_correlation_function_at_zero_delay():
    params = PhononBathParams()
    phi0 = correlation_function(0.0, params)
    assert phi0.imag == 0.0
    assert phi0.real == pytest.approx(-2.0 * np.log(mean_displacement(params)), rel=1e-9)
    assert correlation_function(1.0, PhononBathParams(alpha_p=0.0)) == 0j
    with pytest.raises(DomainError):
        correlation_function(-1.0, params)


def test_correlation_function_decays():
    params = PhononBathParams()
    phi0 = abs(correlation_function(0.0, params))
    assert abs(correlation_function(10.0 / params.omega_b, params)) < 0.02 * phi0


@pytest.mark.parametrize("tau", [0.3, 1.0, 2.5])
def test_correlation_function_matches_fine_simpson(tau):
    params = PhononBathParams()
    omega = np.linspace(0.0, OMEGA_CUTOFF_SCALE * params.omega_b, 200001)
    reference = simpson(correlation_integrand(omega, tau, params), x=omega)
    phi0 = correlation_function(0.0, params).real
    assert abs(correlation_function(tau, params) - reference) < 1e-7 * phi0


def test_correlation_integrand_parity():
    params = PhononBathParams()
    omega = np.linspace(0.05, 5.0, 17)
    forward = correlation_integrand(omega, 1.7, params)
    backward = correlation_integrand(omega, -1.7, params)
    np.testing.assert_allclose(backward.real, forward.real, rtol=1e-14)
    np.testing.assert_allclose(backward.imag, -forward.imag, rtol=1e-14)


def test_green_functions_examples():
    assert green_functions(0.0) == (0j, 0j)
    g_g, g_u = green_functions(np.log(2.0), mean_B=1.0)
    assert g_g == pytest.approx(0.25)
    assert g_u == pytest.approx(0.75)
    g_g, _ = green_functions(0.7j, mean_B=0.9)
    assert g_g.imag == pytest.approx(0.0, abs=1e-15)
    assert g_g.real == pytest.approx(0.81 * (np.cos(0.7) - 1.0))


def test_polaron_validity_examples():
    params = PhononBathParams(omega_b=OMEGA_B)
    assert polaron_validity(0.0, params) == 0.0
    assert polaron_validity(0.5, params, mean_B=1.0) == 0.0
    assert polaron_validity(0.3039, params, mean_B=0.95) == pytest.approx(0.00742, abs=2e-5)
    with pytest.raises(DomainError):
        polaron_validity(-1.0, params)


def test_polaron_validity_report_classes():
    params = PhononBathParams(omega_b=OMEGA_B)
    assert polaron_validity_report(0.3039, params, 0.95)["status"] == "ok"
    assert polaron_validity_report(1.2, params, 0.95)["status"] == "warning"
    assert polaron_validity_report(4.0, params, 0.95)["status"] == "violation"


def test_correlation_table_invariants(bath):
    table = bath.correlation_table()
    assert table.tau_grid.size % 2 == 1
    assert table.tau_grid[0] == 0.0
    assert table.tau_step == pytest.approx(0.02 / bath.params.omega_b)
    assert table.phi_values[0].imag == 0.0
    assert table.phi_values[0].real == pytest.approx(-2.0 * np.log(table.mean_B), rel=1e-9)
    assert np.all(np.abs(table.phi_values) <= abs(table.phi_values[0]) * (1.0 + 1e-12))
    assert bath.correlation_table() is table
    with pytest.raises(ValueError):
        table.phi_values[0] = 0.0


def test_zero_coupling_table_is_zero():
    table = PhononBath(PhononBathParams(alpha_p=0.0)).correlation_table()
    assert table.mean_B == 1.0
    assert not np.any(table.phi_values)


def test_phonon_hash_tracks_parameters():
    assert phonon_hash(PhononBathParams()) == phonon_hash(PhononBathParams())
    assert phonon_hash(PhononBathParams()) != phonon_hash(PhononBathParams(temperature=10.0))
    assert PhononBath(PhononBathParams()).fingerprint() == phonon_hash(PhononBathParams())
