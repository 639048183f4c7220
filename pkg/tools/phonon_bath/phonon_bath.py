import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Any, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from tools.errors import DomainError, NumericalError
from tools.units.units import thermal_frequency

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# ω-integrals are truncated at OMEGA_CUTOFF_SCALE·ω_b
OMEGA_CUTOFF_SCALE = 8.0
QUAD_EPSREL = 1.0e-9
QUAD_LIMIT = 400

VALIDITY_WARNING = 0.1
VALIDITY_VIOLATION = 1.0


@dataclass(frozen=True)
class PhononBathParams:
    """
    Parameters of the longitudinal-acoustic phonon bath.

    alpha_p is the electron-phonon coupling (ps²), omega_b the cutoff
    frequency (rad/ps) and temperature in Kelvin.
    """

    alpha_p: float = 0.03
    omega_b: float = 1.0 / 0.658212
    temperature: float = 4.2

    def __post_init__(self):
        if not self.alpha_p >= 0:
            raise DomainError(f"alpha_p must be >= 0, got {self.alpha_p}")
        if not self.omega_b > 0:
            raise DomainError(f"omega_b must be > 0, got {self.omega_b}")
        if not self.temperature >= 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")

    def to_dict(self) -> Dict[str, float]:
        return {"alpha_p": self.alpha_p, "omega_b": self.omega_b, "temperature": self.temperature}


@dataclass(frozen=True)
class CorrelationTable:
    """
    φ(τ) sampled on a uniform τ-grid, together with the ⟨B⟩ it was built with.

    Immutable after construction; shared read-only by every rate evaluation.
    """

    tau_grid: np.ndarray
    phi_values: np.ndarray
    mean_B: float
    params: PhononBathParams = field(default_factory=PhononBathParams)

    def __post_init__(self):
        self.tau_grid.setflags(write=False)
        self.phi_values.setflags(write=False)

    @property
    def tau_step(self) -> float:
        return float(self.tau_grid[1] - self.tau_grid[0])


def spectral_density(omega: ArrayLike, params: PhononBathParams) -> ArrayLike:
    """
    Super-Ohmic LA-phonon spectral density J(ω) = α_p·ω³·exp(−ω²/2ω_b²)

    Args:
        omega: Phonon frequency in rad/ps (scalar or array, must be >= 0)
        params: Phonon bath parameters

    Returns:
        J(ω) in rad/ps
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("spectral_density is defined for omega >= 0 only")
    value = params.alpha_p * omega ** 3 * np.exp(-omega ** 2 / (2.0 * params.omega_b ** 2))
    return value if value.ndim else float(value)


def _x_coth_x(x: np.ndarray) -> np.ndarray:
    # x·coth(x) with its analytic limit 1 at x = 0
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1.0e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x ** 2 / 3.0, safe / np.tanh(safe))


def _thermal_integrand(omega: ArrayLike, params: PhononBathParams) -> ArrayLike:
    """
    J(ω)/ω²·coth(ħω/2k_BT), finite at ω = 0 (limit 2·α_p·k_BT/ħ)
    """
    omega = np.asarray(omega, dtype=float)
    gaussian = np.exp(-omega ** 2 / (2.0 * params.omega_b ** 2))
    if params.temperature == 0:
        # coth -> 1 exactly at T = 0
        return params.alpha_p * omega * gaussian
    omega_t = thermal_frequency(params.temperature)
    # ω·coth(ω/2ω_T) = 2ω_T·x·coth(x) with x = ω/2ω_T
    return params.alpha_p * 2.0 * omega_t * _x_coth_x(omega / (2.0 * omega_t)) * gaussian


def _vacuum_integrand(omega: ArrayLike, params: PhononBathParams) -> ArrayLike:
    """
    J(ω)/ω² without the thermal factor (enters Im φ)
    """
    omega = np.asarray(omega, dtype=float)
    return params.alpha_p * omega * np.exp(-omega ** 2 / (2.0 * params.omega_b ** 2))


def _quad(func, upper: float, what: str, epsabs: float = 1.0e-14, **kwargs) -> float:
    """
    Run scipy's adaptive quadrature and turn convergence warnings into errors
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, abserr = integrate.quad(
            func, 0.0, upper, epsabs=epsabs, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, **kwargs
        )
    if any(issubclass(w.category, integrate.IntegrationWarning) for w in caught):
        achieved = abserr / abs(value) if value else abserr
        raise NumericalError(
            f"Quadrature for {what} did not converge (achieved relative tolerance {achieved:.2e}, "
            f"requested {QUAD_EPSREL:.0e})"
        )
    return value


def _thermal_integral(params: PhononBathParams) -> float:
    """
    ∫₀^∞ J(ω)/ω²·coth(ħω/2k_BT) dω
    """
    if params.alpha_p == 0:
        return 0.0
    upper = OMEGA_CUTOFF_SCALE * params.omega_b
    return _quad(lambda w: float(_thermal_integrand(w, params)), upper, "<B>")


def mean_displacement(params: PhononBathParams) -> float:
    """
    Thermal average of the phonon displacement operator

    Args:
        params: Phonon bath parameters

    Returns:
        ⟨B⟩ = exp[−½∫J(ω)/ω²·coth(ħω/2k_BT)dω], a real number in (0, 1]
    """
    if params.alpha_p == 0:
        return 1.0
    return float(np.exp(-0.5 * _thermal_integral(params)))


def correlation_function(tau: float, params: PhononBathParams, epsabs: float = 1.0e-14) -> complex:
    """
    Phonon correlation function φ(τ)

    Args:
        tau: Delay time in ps (>= 0)
        params: Phonon bath parameters
        epsabs: Absolute tolerance floor for the oscillatory quadratures

    Returns:
        φ(τ) = ∫J(ω)/ω²[coth(ħω/2k_BT)cos(ωτ) − i·sin(ωτ)]dω
    """
    if tau < 0:
        raise DomainError(f"correlation_function requires tau >= 0, got {tau}")
    if params.alpha_p == 0:
        return 0j

    upper = OMEGA_CUTOFF_SCALE * params.omega_b
    if tau == 0:
        return complex(_thermal_integral(params), 0.0)

    # Oscillatory weights let QUADPACK integrate cos/sin exactly against the envelope
    real_part = _quad(lambda w: float(_thermal_integrand(w, params)), upper, f"Re phi({tau})",
                      epsabs=epsabs, weight="cos", wvar=tau)
    imag_part = -_quad(lambda w: float(_vacuum_integrand(w, params)), upper, f"Im phi({tau})",
                       epsabs=epsabs, weight="sin", wvar=tau)
    return complex(real_part, imag_part)


def correlation_integrand(omega: ArrayLike, tau: float, params: PhononBathParams) -> np.ndarray:
    """
    The complex integrand of φ(τ) at the given frequencies (used for parity checks)
    """
    omega = np.asarray(omega, dtype=float)
    return _thermal_integrand(omega, params) * np.cos(omega * tau) - 1j * _vacuum_integrand(omega, params) * np.sin(omega * tau)


def green_functions(phi: ArrayLike, mean_B: float = 1.0) -> Tuple[ArrayLike, ArrayLike]:
    """
    Polaron Green's functions

    Args:
        phi: φ(τ), scalar or array
        mean_B: ⟨B⟩

    Returns:
        (G_g, G_u) = (⟨B⟩²(cosh φ − 1), ⟨B⟩²·sinh φ)
    """
    phi = np.asarray(phi, dtype=complex)
    scale = mean_B ** 2
    g_g = scale * (np.cosh(phi) - 1.0)
    g_u = scale * np.sinh(phi)
    if phi.ndim == 0:
        return complex(g_g), complex(g_u)
    return g_g, g_u


def polaron_validity(omega_peak: float, params: PhononBathParams, mean_B: Optional[float] = None) -> float:
    """
    Validity metric of the polaron master equation, (Ω/ω_b)²·(1 − ⟨B⟩⁴)

    Args:
        omega_peak: Peak Rabi frequency in rad/ps
        params: Phonon bath parameters
        mean_B: ⟨B⟩ if already known; computed from params otherwise

    Returns:
        The metric; values >= 0.1 deserve a warning
    """
    if omega_peak < 0:
        raise DomainError(f"omega_peak must be >= 0, got {omega_peak}")
    if mean_B is None:
        mean_B = mean_displacement(params)
    return (omega_peak / params.omega_b) ** 2 * (1.0 - mean_B ** 4)


def polaron_validity_report(omega_peak: float, params: PhononBathParams, mean_B: Optional[float] = None) -> Dict[str, Any]:
    """
    Classify the validity metric for the run manifest
    """
    metric = polaron_validity(omega_peak, params, mean_B)
    if metric >= VALIDITY_VIOLATION:
        status = "violation"
    elif metric >= VALIDITY_WARNING:
        status = "warning"
    else:
        status = "ok"
    return {"metric": metric, "status": status, "omega_peak": omega_peak}


class PhononBath:
    """
    A phonon bath with cached ⟨B⟩ and φ(τ) samples
    """

    # τ-grid of the cached correlation function, in units of 1/ω_b
    TAU_STEP_SCALE = 0.02
    TAU_MAX_SCALE = 12.0

    def __init__(self, params: PhononBathParams, tau_step_scale: float = TAU_STEP_SCALE,
                 tau_max_scale: float = TAU_MAX_SCALE):
        """
        Initialize the PhononBath

        Args:
            params: Phonon bath parameters
            tau_step_scale: ω_b·Δτ of the cached φ grid
            tau_max_scale: ω_b·τ_max of the cached φ grid
        """
        self.params = params
        self.tau_step_scale = tau_step_scale
        self.tau_max_scale = tau_max_scale
        self._mean_B: Optional[float] = None
        self._table: Optional[CorrelationTable] = None

    @property
    def mean_B(self) -> float:
        if self._mean_B is None:
            self._mean_B = mean_displacement(self.params)
            logger.debug("<B> = %.6f for %s", self._mean_B, self.params)
        return self._mean_B

    def tau_grid(self) -> np.ndarray:
        """
        Uniform τ-grid with an odd number of points (composite Simpson needs pairs of panels)
        """
        n_steps = int(round(self.tau_max_scale / self.tau_step_scale))
        if n_steps % 2:
            n_steps += 1
        step = self.tau_step_scale / self.params.omega_b
        return np.arange(n_steps + 1) * step

    def correlation_table(self) -> CorrelationTable:
        """
        Build (once) the cached φ(τ) table

        Returns:
            CorrelationTable shared by every rate evaluation
        """
        if self._table is not None:
            return self._table

        tau_grid = self.tau_grid()
        if self.params.alpha_p == 0:
            phi = np.zeros(tau_grid.size, dtype=complex)
        else:
            phi0 = _thermal_integral(self.params)
            # absolute floor relative to |φ(0)|: the tail of φ is far below the relative target
            epsabs = 1.0e-12 * phi0
            phi = np.empty(tau_grid.size, dtype=complex)
            phi[0] = complex(phi0, 0.0)
            for i, tau in enumerate(tau_grid[1:], start=1):
                phi[i] = correlation_function(float(tau), self.params, epsabs=epsabs)

        self._table = CorrelationTable(tau_grid=tau_grid, phi_values=phi, mean_B=self.mean_B, params=self.params)
        logger.info("Built phonon correlation table: %d samples up to tau = %.3f ps, <B> = %.4f",
                    tau_grid.size, tau_grid[-1], self.mean_B)
        return self._table

    def fingerprint(self) -> str:
        return phonon_hash(self.params, self.tau_step_scale, self.tau_max_scale)


def phonon_hash(params: PhononBathParams, tau_step_scale: float = PhononBath.TAU_STEP_SCALE,
                tau_max_scale: float = PhononBath.TAU_MAX_SCALE) -> str:
    """
    Stable hash of the bath parameters and φ-grid spec (used as a cache key)
    """
    payload = {**params.to_dict(), "tau_step_scale": tau_step_scale, "tau_max_scale": tau_max_scale}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
