import numpy as np
import pytest

from tools.errors import DomainError
from tools.units.units import (
    GAMMA_N,
    HBAR_MEV_PS,
    UNIT_TABLES,
    angular_frequency_to_energy,
    energy_to_angular_frequency,
    fwhm_to_sigma,
    lifetime_to_rate,
    sigma_to_fwhm,
    thermal_frequency,
    transition_wavelength,
    wavelength_to_energy,
)


def test_energy_conversion_examples():
    assert energy_to_angular_frequency(0.0) == 0.0
    assert energy_to_angular_frequency(1.0) == pytest.approx(1.5193, abs=1e-4)
    assert energy_to_angular_frequency(HBAR_MEV_PS) == pytest.approx(1.0, rel=1e-15)


def test_energy_round_trip():
    energies = np.array([1.0e-3, 0.2, 1.0, 23.5, 1300.0])
    back = angular_frequency_to_energy(energy_to_angular_frequency(energies))
    np.testing.assert_allclose(back, energies, rtol=1e-12)


def test_transition_wavelength_examples():
    assert transition_wavelength(1.3) == pytest.approx(953.7, abs=0.05)
    assert transition_wavelength(1239.84) == pytest.approx(1.0, rel=1e-15)
    assert transition_wavelength(0.62) == pytest.approx(1999.7, abs=0.05)
    assert wavelength_to_energy(transition_wavelength(1.3)) == pytest.approx(1.3, rel=1e-12)


@pytest.mark.parametrize("energy", [0.0, -1.3])
def test_transition_wavelength_rejects_non_positive(energy):
    with pytest.raises(DomainError):
        transition_wavelength(energy)


def test_gamma_n_is_one():
    assert GAMMA_N == 1.0


def test_broadening_matches_sigma_15():
    sigma = energy_to_angular_frequency(fwhm_to_sigma(23.5))
    assert sigma == pytest.approx(15.16, abs=0.01)
    assert abs(sigma / 15.0 - 1.0) < 0.02
    assert sigma_to_fwhm(fwhm_to_sigma(23.5)) == pytest.approx(23.5, rel=1e-12)


def test_thermal_and_lifetime_helpers():
    # k_B·4.2 K / ħ
    assert thermal_frequency(4.2) == pytest.approx(0.08617333 * 4.2 / 0.658212, rel=1e-12)
    assert thermal_frequency(0.0) == 0.0
    assert lifetime_to_rate(2000.0) == pytest.approx(0.0005)
    with pytest.raises(DomainError):
        lifetime_to_rate(0.0)


def test_unit_tables_convert_to_internal_units():
    assert UNIT_TABLES["frequency"]["meV"](1.0) == pytest.approx(1.0 / 0.658212)
    assert UNIT_TABLES["rate"]["ns"](2.0) == pytest.approx(0.0005)
    assert UNIT_TABLES["time"]["ns"](1.0) == pytest.approx(1000.0)
    assert UNIT_TABLES["length"]["um"](500.0) == pytest.approx(0.5)
    assert UNIT_TABLES["angle"]["pi"](2.0) == pytest.approx(2.0 * np.pi)
    assert UNIT_TABLES["density"]["cm^-3"](5.0e14) == pytest.approx(5.0e20)
