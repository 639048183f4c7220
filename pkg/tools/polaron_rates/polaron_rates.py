import logging
from dataclasses import dataclass, fields
from typing import Dict, Tuple, Union

import numpy as np
from scipy.integrate import simpson

from tools.errors import ContractError, DomainError
from tools.phonon_bath.phonon_bath import CorrelationTable

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Order of the kernel planes in every (7, ...) kernel array
KERNEL_NAMES = (
    "k_cosh_f",
    "k_sinh_cos",
    "k_exp_sin",
    "k_expm_sin",
    "k_exp_sin_re",
    "k_cosh_h",
    "k_sinh_sin",
)

RATE_NAMES = (
    "gamma_plus",
    "gamma_minus",
    "gamma_cd",
    "gamma_sd",
    "delta_pm",
    "gamma_gu_plus",
    "gamma_gu_minus",
)


@dataclass(frozen=True)
class RateKernels:
    """
    Field-phase independent τ-integrals at one (Ω_R, Δ).

    omega_R and delta record where the kernels were evaluated, so that
    assemble_rates can refuse kernels built for another point.
    """

    omega_R: float
    delta: float
    k_cosh_f: float
    k_sinh_cos: float
    k_exp_sin: float
    k_expm_sin: float
    k_exp_sin_re: float
    k_cosh_h: float
    k_sinh_sin: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in KERNEL_NAMES])

    @classmethod
    def from_array(cls, omega_R: float, delta: float, values: np.ndarray) -> "RateKernels":
        return cls(omega_R, delta, *(float(v) for v in values))


@dataclass(frozen=True)
class PhononRates:
    """
    The seven phonon-induced quantities entering the simplified master equation (rad/ps).

    Fields are scalars for a single dot, or arrays with one entry per detuning class.
    """

    gamma_plus: ArrayLike
    gamma_minus: ArrayLike
    gamma_cd: ArrayLike
    gamma_sd: ArrayLike
    delta_pm: ArrayLike
    gamma_gu_plus: ArrayLike
    gamma_gu_minus: ArrayLike

    def as_dict(self) -> Dict[str, ArrayLike]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def zero_rates(size: int = 0) -> PhononRates:
    """
    Rates of a phonon-free run

    Args:
        size: 0 for scalar rates, otherwise the number of detuning classes
    """
    if size:
        return PhononRates(*(np.zeros(size) for _ in RATE_NAMES))
    return PhononRates(*(0.0 for _ in RATE_NAMES))


def generalized_rabi(omega_R: ArrayLike, delta: ArrayLike) -> ArrayLike:
    """
    Generalized Rabi frequency η = √(Ω_R² + Δ²)

    Args:
        omega_R: Polaron-shifted Rabi frequency (>= 0)
        delta: Detuning

    Returns:
        η in rad/ps
    """
    if np.any(np.asarray(omega_R) < 0):
        raise DomainError("generalized_rabi requires omega_R >= 0")
    return np.hypot(omega_R, delta)


def _phonon_factors(corr: CorrelationTable) -> Dict[str, np.ndarray]:
    """
    τ-only factors of the kernel integrands
    """
    phi = corr.phi_values
    exp_phi = np.exp(phi)
    return {
        "cosh_re": np.real(np.cosh(phi) - 1.0),
        "sinh_re": np.real(np.sinh(phi)),
        "exp_im": np.imag(exp_phi - 1.0),
        "exp_re": np.real(exp_phi - 1.0),
        "expm_re": np.real(np.exp(-phi) - 1.0),
    }


def compute_kernel_grid(omega_R: np.ndarray, delta: np.ndarray, corr: CorrelationTable) -> np.ndarray:
    """
    Evaluate every kernel at a batch of (Ω_R, Δ) points

    Args:
        omega_R: Polaron-shifted Rabi frequencies, shape (n,)
        delta: Detunings, shape (n,)
        corr: Cached phonon correlation function

    Returns:
        Array of shape (7, n), planes ordered as KERNEL_NAMES
    """
    omega_R = np.atleast_1d(np.asarray(omega_R, dtype=float))
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    omega_R, delta = np.broadcast_arrays(omega_R, delta)
    eta = generalized_rabi(omega_R, delta)

    tau = corr.tau_grid
    dtau = corr.tau_step
    factors = _phonon_factors(corr)

    eta_tau = eta[:, None] * tau[None, :]
    cos_eta_tau = np.cos(eta_tau)
    # sin(ητ)/η and (1 − cos ητ)/η² via sinc, both finite at η = 0
    sin_over_eta = tau[None, :] * np.sinc(eta_tau / np.pi)
    one_minus_cos_over_eta2 = 0.5 * tau[None, :] ** 2 * np.sinc(eta_tau / (2.0 * np.pi)) ** 2

    d = delta[:, None]
    f = 1.0 - d ** 2 * one_minus_cos_over_eta2
    h = d * one_minus_cos_over_eta2
    delta_sin = d * sin_over_eta

    integrands = (
        factors["cosh_re"] * f,
        factors["sinh_re"] * cos_eta_tau,
        factors["exp_im"] * delta_sin,
        factors["expm_re"] * delta_sin,
        factors["exp_re"] * delta_sin,
        factors["cosh_re"] * h,
        factors["sinh_re"] * sin_over_eta,
    )
    return np.stack([simpson(y, dx=dtau, axis=-1) for y in integrands])


def compute_kernels(omega_R: float, delta: float, corr: CorrelationTable) -> RateKernels:
    """
    Evaluate the seven rate kernels at one (Ω_R, Δ) by composite Simpson on the φ grid

    Args:
        omega_R: Polaron-shifted Rabi frequency ⟨B⟩|Ω| (>= 0)
        delta: Detuning of the dot
        corr: Cached phonon correlation function

    Returns:
        RateKernels tagged with (omega_R, delta)
    """
    if omega_R < 0:
        raise DomainError(f"compute_kernels requires omega_R >= 0, got {omega_R}")
    values = compute_kernel_grid(np.array([omega_R]), np.array([delta]), corr)[:, 0]
    return RateKernels.from_array(omega_R, delta, values)


def assemble_rate_arrays(omega_B: ArrayLike, kernels: np.ndarray) -> Tuple[np.ndarray, ...]:
    """
    Combine kernels with the phase-dependent prefactors of the polaron-dressed field

    Args:
        omega_B: ⟨B⟩Ω, complex, scalar or shape (n,)
        kernels: Kernel array of shape (7,) or (7, n)

    Returns:
        Tuple of the seven rates in RATE_NAMES order
    """
    omega_B = np.asarray(omega_B, dtype=complex)
    re = omega_B.real
    im = omega_B.imag
    omega_R2 = re ** 2 + im ** 2
    omega_s = re ** 2 - im ** 2
    omega_t = 2.0 * re * im
    k_cosh_f, k_sinh_cos, k_exp_sin, k_expm_sin, k_exp_sin_re, k_cosh_h, k_sinh_sin = kernels

    half_r2 = 0.5 * omega_R2
    symmetric = k_cosh_f + k_sinh_cos
    dephasing = k_sinh_cos - k_cosh_f
    return (
        half_r2 * (symmetric - k_exp_sin),
        half_r2 * (symmetric + k_exp_sin),
        0.5 * (omega_s * dephasing + omega_t * k_expm_sin),
        0.5 * (omega_t * dephasing - omega_s * k_expm_sin),
        half_r2 * k_exp_sin_re,
        half_r2 * (im * k_cosh_h + re * k_sinh_sin),
        half_r2 * (re * k_cosh_h - im * k_sinh_sin),
    )


def assemble_rates(omega_complex: complex, delta: float, kernels: RateKernels, mean_B: float) -> PhononRates:
    """
    Phonon rates for a complex field from kernels evaluated at the matching (Ω_R, Δ)

    Args:
        omega_complex: Bare complex Rabi frequency Ω
        delta: Detuning
        kernels: Kernels computed at Ω_R = mean_B·|Ω| and the same detuning
        mean_B: ⟨B⟩

    Returns:
        PhononRates with scalar fields
    """
    omega_R = mean_B * abs(omega_complex)
    if not (np.isclose(kernels.omega_R, omega_R, rtol=1e-9, atol=1e-12)
            and np.isclose(kernels.delta, delta, rtol=1e-9, atol=1e-12)):
        raise ContractError(
            f"Kernels were evaluated at (omega_R={kernels.omega_R:.6g}, delta={kernels.delta:.6g}), "
            f"not at (omega_R={omega_R:.6g}, delta={delta:.6g})"
        )
    rates = assemble_rate_arrays(mean_B * omega_complex, kernels.as_array())
    return PhononRates(*(float(r) for r in rates))


def rate_map(omega_complex: np.ndarray, deltas: np.ndarray, corr: CorrelationTable) -> Dict[str, np.ndarray]:
    """
    Direct evaluation of the seven rates over a (field sample, detuning) grid

    Args:
        omega_complex: Bare complex field samples, shape (n_t,) (e.g. a pulse in time)
        deltas: Detunings, shape (n_delta,)
        corr: Cached phonon correlation function (carries ⟨B⟩)

    Returns:
        Dictionary rate name -> array of shape (n_t, n_delta)
    """
    omega_B = corr.mean_B * np.asarray(omega_complex, dtype=complex)
    deltas = np.asarray(deltas, dtype=float)
    omega_grid, delta_grid = np.meshgrid(omega_B, deltas, indexing="ij")
    kernels = compute_kernel_grid(np.abs(omega_grid).ravel(), delta_grid.ravel(), corr)
    rates = assemble_rate_arrays(omega_grid.ravel(), kernels)
    shape = omega_grid.shape
    return {name: values.reshape(shape) for name, values in zip(RATE_NAMES, rates)}
