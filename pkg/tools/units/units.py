import numpy as np
from dataclasses import dataclass
from typing import Dict, Union

from tools.errors import DomainError

ArrayLike = Union[float, np.ndarray]

# Physical constants in the internal unit system (meV, ps, rad/ps, nm, mm)
HBAR_MEV_PS = 0.658212  # meV·ps
HC_EV_NM = 1239.84  # eV·nm
K_B_MEV_PER_K = 0.08617333  # meV/K
GAMMA_N = 1.0  # rad/ps

NM_PER_MM = 1.0e6
CUBIC_MM_PER_CUBIC_M = 1.0e9


@dataclass(frozen=True)
class UnitSystem:
    """
    The single internal unit system shared by every module.

    Frequencies are rad/ps, times ps, lengths mm. Energies quoted in meV are
    converted once, when a configuration document is parsed.
    """

    hbar: float = HBAR_MEV_PS
    frequency_unit: str = "rad/ps"
    time_unit: str = "ps"
    length_unit: str = "mm"
    gamma_n: float = GAMMA_N


INTERNAL_UNITS = UnitSystem()


def energy_to_angular_frequency(energy_mev: ArrayLike) -> ArrayLike:
    """
    Convert an energy in meV to an angular frequency in rad/ps

    Args:
        energy_mev: Energy in meV

    Returns:
        E / ħ in rad/ps
    """
    return energy_mev / HBAR_MEV_PS


def angular_frequency_to_energy(omega: ArrayLike) -> ArrayLike:
    """
    Convert an angular frequency in rad/ps to an energy in meV
    """
    return omega * HBAR_MEV_PS


def transition_wavelength(energy_ev: float) -> float:
    """
    Carrier wavelength of a transition

    Args:
        energy_ev: Transition energy ħω_c in eV

    Returns:
        Wavelength in nm
    """
    if not energy_ev > 0:
        raise DomainError(f"Transition energy must be positive, got {energy_ev} eV")
    return HC_EV_NM / energy_ev


def wavelength_to_energy(wavelength_nm: float) -> float:
    """
    Photon energy (eV) for a wavelength in nm
    """
    if not wavelength_nm > 0:
        raise DomainError(f"Wavelength must be positive, got {wavelength_nm} nm")
    return HC_EV_NM / wavelength_nm


def thermal_frequency(temperature: float) -> float:
    """
    k_B·T/ħ in rad/ps
    """
    return K_B_MEV_PER_K * temperature / HBAR_MEV_PS


def fwhm_to_sigma(fwhm: ArrayLike) -> ArrayLike:
    """
    Standard deviation of a Gaussian with the given full width at half maximum
    """
    return fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def sigma_to_fwhm(sigma: ArrayLike) -> ArrayLike:
    """
    Full width at half maximum of a Gaussian

    Args:
        sigma: Standard deviation, in any unit

    Returns:
        2·√(2 ln 2)·σ in the same unit
    """
    return sigma * 2.0 * np.sqrt(2.0 * np.log(2.0))


def lifetime_to_rate(lifetime_ps: float) -> float:
    """
    Decay rate (1/ps) for a lifetime in ps
    """
    if not lifetime_ps > 0:
        raise DomainError(f"Lifetime must be positive, got {lifetime_ps} ps")
    return 1.0 / lifetime_ps


def per_cubic_metre_to_per_cubic_mm(density: float) -> float:
    return density / CUBIC_MM_PER_CUBIC_M


def nm_to_mm(length_nm: float) -> float:
    return length_nm / NM_PER_MM


# Unit suffixes accepted by the config parser, per physical quantity.
# Each entry maps a suffix to a converter into the internal unit.
UNIT_TABLES: Dict[str, Dict[str, object]] = {
    "frequency": {
        "rad/ps": lambda v: v,
        "meV": energy_to_angular_frequency,
        "ueV": lambda v: energy_to_angular_frequency(v * 1.0e-3),
        "gamma_n": lambda v: v * GAMMA_N,
    },
    "rate": {
        "ps^-1": lambda v: v,
        "1/ps": lambda v: v,
        "ns^-1": lambda v: v * 1.0e-3,
        "ns": lambda v: lifetime_to_rate(v * 1.0e3),
        "ps": lifetime_to_rate,
        "ueV": lambda v: energy_to_angular_frequency(v * 1.0e-3),
    },
    "time": {
        "ps": lambda v: v,
        "ns": lambda v: v * 1.0e3,
        "fs": lambda v: v * 1.0e-3,
        "1/gamma_n": lambda v: v / GAMMA_N,
    },
    "length": {
        "mm": lambda v: v,
        "um": lambda v: v * 1.0e-3,
        "m": lambda v: v * 1.0e3,
    },
    "energy_ev": {
        "eV": lambda v: v,
        "meV": lambda v: v * 1.0e-3,
    },
    "density": {
        "m^-3": lambda v: v,
        "cm^-3": lambda v: v * 1.0e6,
    },
    "coupling": {
        "ps^2": lambda v: v,
    },
    "temperature": {
        "K": lambda v: v,
    },
    "angle": {
        "rad": lambda v: v,
        "pi": lambda v: v * np.pi,
    },
    "count": {
        "": lambda v: v,
    },
    "ratio": {
        "": lambda v: v,
    },
}
