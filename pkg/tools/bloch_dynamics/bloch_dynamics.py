import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np

from tools.errors import DomainError, NumericalError
from tools.polaron_rates.polaron_rates import PhononRates, zero_rates

logger = logging.getLogger(__name__)

ArrayLike = Union[float, complex, np.ndarray]

# Trace drift above this is rescaled away (and counted)
TRACE_RENORMALIZE = 1.0e-12
# Invariant violations above this abort the integration
INVARIANT_TOLERANCE = 1.0e-6
# φ-functions switch from the recursion to their Taylor series below this |z|
PHI_SERIES_RADIUS = 0.5
PHI_SERIES_TERMS = 16
_FACTORIALS = tuple(float(math.factorial(n)) for n in range(PHI_SERIES_TERMS + 4))

# Raising operator |1⟩⟨2| in the {|1⟩ exciton, |2⟩ ground} basis
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
EXCITON_PROJECTOR = SIGMA_PLUS @ SIGMA_MINUS


@dataclass
class QdState:
    """
    Density matrix of one quantum dot (or of a batch of detuning classes).

    rho11 is the exciton population, rho22 the ground population and rho12 = ⟨1|ρ|2⟩.
    Hermiticity is structural: rho21 is rho12 conjugated.
    """

    rho11: ArrayLike
    rho22: ArrayLike
    rho12: ArrayLike

    @property
    def trace(self) -> ArrayLike:
        return self.rho11 + self.rho22

    def as_matrix(self) -> np.ndarray:
        """
        2×2 density matrix (scalar states only)
        """
        return np.array([[self.rho11, self.rho12], [np.conj(self.rho12), self.rho22]], dtype=complex)

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "QdState":
        return cls(float(rho[0, 0].real), float(rho[1, 1].real), complex(rho[0, 1]))


def ground_state(size: int = 0) -> QdState:
    """
    All population in the ground state |2⟩

    Args:
        size: 0 for a scalar state, otherwise the number of detuning classes
    """
    if size:
        return QdState(np.zeros(size), np.ones(size), np.zeros(size, dtype=complex))
    return QdState(0.0, 1.0, 0j)


@dataclass(frozen=True)
class RelaxationParams:
    """
    Radiative decay γ and pure dephasing γ_d (rad/ps)
    """

    gamma: float = 0.0005
    gamma_d: float = 0.0005

    def __post_init__(self):
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if not self.gamma_d >= 0:
            raise DomainError(f"gamma_d must be >= 0, got {self.gamma_d}")

    @property
    def t2_prime(self) -> float:
        """
        Effective dipole dephasing time T₂′ = 2/(γ + γ_d)
        """
        total = self.gamma + self.gamma_d
        return np.inf if total == 0 else 2.0 / total


def master_equation_rhs(state: QdState, omega_complex: ArrayLike, delta: ArrayLike, rates: PhononRates,
                        relax: RelaxationParams, mean_B: float) -> QdState:
    """
    Time derivative of the density matrix under the simplified polaron master equation

    The equation is expanded in the {|1⟩, |2⟩} basis with H_s/ħ = −Δσ⁺σ⁻ + (⟨B⟩Ω σ⁺ + h.c.)/2
    and ℒ[O]ρ = 2OρO† − O†Oρ − ρO†O:

        dρ11/dt = Im(Ω_B ρ12*) − γρ11 + Γ⁺ρ22 − Γ⁻ρ11 − 2Γ^{gu+} Im ρ12 − 2Γ^{gu−} Re ρ12
        dρ12/dt = i(Δ + Δ^{σ+σ−})ρ12 + i(Ω_B/2)(ρ11 − ρ22)
                  − ½(γ + γ_d + Γ⁺ + Γ⁻)ρ12 − (Γ^{cd} + iΓ^{sd})ρ12*

    Works elementwise on batched states, fields, detunings and rates.

    Args:
        state: Current state
        omega_complex: Bare complex Rabi frequency Ω
        delta: Detuning of each dot
        rates: Phonon rates evaluated at this (Ω, Δ)
        relax: Radiative decay and pure dephasing
        mean_B: ⟨B⟩

    Returns:
        The derivative, as a QdState
    """
    x = state.rho11
    y = state.rho22
    c = state.rho12
    omega_B = mean_B * omega_complex
    c_conj = np.conj(c)

    d_rho11 = (np.imag(omega_B * c_conj)
               - relax.gamma * x
               + rates.gamma_plus * y
               - rates.gamma_minus * x
               - 2.0 * rates.gamma_gu_plus * np.imag(c)
               - 2.0 * rates.gamma_gu_minus * np.real(c))
    d_rho12 = (1j * (delta + rates.delta_pm) * c
               + 0.5j * omega_B * (x - y)
               - 0.5 * (relax.gamma + relax.gamma_d + rates.gamma_plus + rates.gamma_minus) * c
               - (rates.gamma_cd + 1j * rates.gamma_sd) * c_conj)
    return QdState(d_rho11, -d_rho11, d_rho12)


def _lindblad(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    op_dag = op.conj().T
    return 2.0 * op @ rho @ op_dag - op_dag @ op @ rho - rho @ op_dag @ op


def master_equation_matrix_rhs(rho: np.ndarray, omega_complex: complex, delta: float, rates: PhononRates,
                               relax: RelaxationParams, mean_B: float) -> np.ndarray:
    """
    The same master equation in operator form, multiplied out on a 2×2 matrix

    Used to cross-check the component expansion in master_equation_rhs.
    """
    sp, sm, n = SIGMA_PLUS, SIGMA_MINUS, EXCITON_PROJECTOR
    omega_B = mean_B * omega_complex
    hamiltonian = -delta * n + 0.5 * (omega_B * sp + np.conj(omega_B) * sm)

    d_rho = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    d_rho += 0.5 * relax.gamma * _lindblad(sm, rho)
    d_rho += 0.5 * relax.gamma_d * _lindblad(n, rho)
    d_rho += 0.5 * rates.gamma_plus * _lindblad(sp, rho)
    d_rho += 0.5 * rates.gamma_minus * _lindblad(sm, rho)
    d_rho -= rates.gamma_cd * (sp @ rho @ sp + sm @ rho @ sm)
    d_rho -= 1j * rates.gamma_sd * (sp @ rho @ sp - sm @ rho @ sm)
    d_rho += 1j * rates.delta_pm * (n @ rho - rho @ n)

    gu_plus = 1j * rates.gamma_gu_plus * (n @ rho @ sp + sm @ rho - n @ rho @ sm)
    d_rho -= gu_plus + gu_plus.conj().T
    gu_minus = rates.gamma_gu_minus * (n @ rho @ sp - sm @ rho + n @ rho @ sm)
    d_rho -= gu_minus + gu_minus.conj().T
    return d_rho


RateProvider = Callable[[ArrayLike], PhononRates]


@dataclass
class StepContext:
    """
    Everything a time step needs besides the state and the field.

    rates maps the bare complex field seen by each dot to its PhononRates;
    None runs without phonons. corrections counts trace renormalizations.
    """

    relax: RelaxationParams
    mean_B: float = 1.0
    rates: Optional[RateProvider] = None
    corrections: int = field(default=0)

    def rates_at(self, omega_complex: ArrayLike, size: int = 0) -> PhononRates:
        if self.rates is None:
            return zero_rates(size)
        return self.rates(omega_complex)


def phi_functions(z: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    φ₁, φ₂, φ₃ of exponential integrators, φ_k(z) = Σ_j z^j/(j + k)!

    Small |z| use the series, larger |z| the recursion φ_{k+1} = (φ_k − 1/k!)/z.
    """
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < PHI_SERIES_RADIUS
    safe = np.where(small, 1.0, z)
    phi1 = (np.exp(safe) - 1.0) / safe
    phi2 = (phi1 - 1.0) / safe
    phi3 = (phi2 - 0.5) / safe

    series = [np.zeros_like(z) for _ in range(3)]
    term = np.ones_like(z)
    for j in range(PHI_SERIES_TERMS):
        for k in range(3):
            series[k] = series[k] + term / _FACTORIALS[j + k + 1]
        term = term * z
    return (np.where(small, series[0], phi1),
            np.where(small, series[1], phi2),
            np.where(small, series[2], phi3))


@dataclass(frozen=True)
class EtdCoefficients:
    """
    Exponential RK4 weights of the coherence for fixed detunings and step.

    The populations carry no linear term, so their weights reduce to classical RK4.
    """

    half_turn: np.ndarray
    full_turn: np.ndarray
    half_weight: np.ndarray
    weight_start: np.ndarray
    weight_middle: np.ndarray
    weight_end: np.ndarray

    @classmethod
    def build(cls, delta: ArrayLike, dt: float) -> "EtdCoefficients":
        z = 1j * np.asarray(delta, dtype=float) * dt
        phi1, phi2, phi3 = phi_functions(z)
        half_phi1 = phi_functions(0.5 * z)[0]
        return cls(
            half_turn=np.exp(0.5 * z),
            full_turn=np.exp(z),
            half_weight=0.5 * dt * half_phi1,
            weight_start=dt * (phi1 - 3.0 * phi2 + 4.0 * phi3),
            weight_middle=2.0 * dt * (phi2 - 2.0 * phi3),
            weight_end=dt * (4.0 * phi3 - phi2),
        )


def _etd_stage(base: QdState, turn: np.ndarray, population_step: float, coherence_step: np.ndarray,
               deriv: QdState) -> QdState:
    return QdState(base.rho11 + population_step * deriv.rho11,
                   base.rho22 + population_step * deriv.rho22,
                   base.rho12 * turn + coherence_step * deriv.rho12)


def _rk4_update(state: QdState, fields: Tuple[ArrayLike, ArrayLike, ArrayLike], rates: Tuple[PhononRates, ...],
                delta: ArrayLike, dt: float, ctx: StepContext, coef: Optional[EtdCoefficients] = None) -> QdState:
    """
    One exponential RK4 (ETD-RK4) step with the field and rates of each stage supplied

    The detuning term iΔρ12 is integrated exactly and the remaining terms are
    weighted with φ-functions of iΔdt, so detuned classes stay accurate at any Δ·dt.
    At Δ = 0 the step is classical RK4.
    """
    field_t, field_half, field_next = fields
    rates_t, rates_half, rates_next = rates
    if coef is None:
        coef = EtdCoefficients.build(delta, dt)
    half = 0.5 * dt

    def rhs(s: QdState, omega, r) -> QdState:
        return master_equation_rhs(s, omega, 0.0, r, ctx.relax, ctx.mean_B)

    k1 = rhs(state, field_t, rates_t)
    a = _etd_stage(state, coef.half_turn, half, coef.half_weight, k1)
    k2 = rhs(a, field_half, rates_half)
    b = _etd_stage(state, coef.half_turn, half, coef.half_weight, k2)
    k3 = rhs(b, field_half, rates_half)
    c = _etd_stage(a, coef.half_turn, half, coef.half_weight,
                   QdState(2.0 * k3.rho11 - k1.rho11, 2.0 * k3.rho22 - k1.rho22, 2.0 * k3.rho12 - k1.rho12))
    k4 = rhs(c, field_next, rates_next)

    w = dt / 6.0
    new = QdState(
        state.rho11 + w * (k1.rho11 + 2.0 * k2.rho11 + 2.0 * k3.rho11 + k4.rho11),
        state.rho22 + w * (k1.rho22 + 2.0 * k2.rho22 + 2.0 * k3.rho22 + k4.rho22),
        (state.rho12 * coef.full_turn + coef.weight_start * k1.rho12
         + coef.weight_middle * (k2.rho12 + k3.rho12) + coef.weight_end * k4.rho12),
    )
    return _enforce_invariants(new, ctx, dt)


def _enforce_invariants(state: QdState, ctx: StepContext, dt: float) -> QdState:
    """
    Rescale away trace drift and abort on a broken density matrix
    """
    trace = state.rho11 + state.rho22
    drift = np.abs(trace - 1.0)
    if np.any(drift > INVARIANT_TOLERANCE) or not np.all(np.isfinite(trace)):
        raise NumericalError(
            f"Density matrix trace drifted by {np.nanmax(drift):.3e} in one step; reduce the time step (dt = {dt:.4g} ps)"
        )
    if np.any(drift > TRACE_RENORMALIZE):
        ctx.corrections += int(np.count_nonzero(drift > TRACE_RENORMALIZE))
        state = QdState(state.rho11 / trace, state.rho22 / trace, state.rho12 / trace)

    x = np.asarray(state.rho11)
    y = np.asarray(state.rho22)
    excess = np.abs(state.rho12) ** 2 - x * y
    if (np.any(x < -INVARIANT_TOLERANCE) or np.any(x > 1.0 + INVARIANT_TOLERANCE)
            or np.any(excess > INVARIANT_TOLERANCE)):
        raise NumericalError(
            f"Density matrix lost positivity (rho11 in [{x.min():.3e}, {x.max():.3e}], "
            f"|rho12|^2 - rho11*rho22 up to {np.max(excess):.3e}); reduce the time step (dt = {dt:.4g} ps)"
        )
    return state


def step_rk4(state: QdState, field_at_t: ArrayLike, field_at_half: ArrayLike, field_at_next: ArrayLike,
             delta: ArrayLike, dt: float, ctx: StepContext) -> QdState:
    """
    Advance the state by dt with exponential RK4

    Args:
        state: State at t
        field_at_t: Ω(t)
        field_at_half: Ω(t + dt/2)
        field_at_next: Ω(t + dt)
        delta: Detuning(s)
        dt: Time step (> 0)
        ctx: Relaxation, ⟨B⟩ and rate provider; its correction counter is updated

    Returns:
        State at t + dt
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    size = np.size(delta) if np.ndim(delta) else 0
    rates = (ctx.rates_at(field_at_t, size), ctx.rates_at(field_at_half, size), ctx.rates_at(field_at_next, size))
    return _rk4_update(state, (field_at_t, field_at_half, field_at_next), rates, delta, dt, ctx)


def midpoint_samples(samples: np.ndarray) -> np.ndarray:
    """
    Field at the half-steps of a uniform grid

    Interior points use the four-point cubic (9(f₀ + f₁) − (f₋₁ + f₂))/16,
    the first and last interval fall back to linear interpolation.
    """
    samples = np.asarray(samples)
    mid = 0.5 * (samples[:-1] + samples[1:])
    if samples.shape[0] >= 4:
        mid[1:-1] = (9.0 * (samples[1:-2] + samples[2:-1]) - (samples[:-3] + samples[3:])) / 16.0
    return mid


@dataclass
class WindowResult:
    """
    Reduced observables of a batch of dots driven through a whole time window

    coherence and population are weighted sums over the dots at every time sample;
    stored_coherence/stored_population hold per-dot values at the requested samples.
    """

    coherence: np.ndarray
    population: np.ndarray
    final_state: QdState
    stored_coherence: Optional[np.ndarray] = None
    stored_population: Optional[np.ndarray] = None
    corrections: int = 0


def integrate_window(field_samples: np.ndarray, dt: float, deltas: np.ndarray, ctx: StepContext,
                     weights: Optional[np.ndarray] = None, initial: Optional[QdState] = None,
                     store_indices: Optional[np.ndarray] = None) -> WindowResult:
    """
    Drive every detuning class through the sampled field with exponential RK4

    Args:
        field_samples: Ω on the uniform time grid, shape (n_t,) or (n_t, n_nodes) for per-class fields
        dt: Grid spacing
        deltas: Detuning classes, shape (n_nodes,)
        ctx: Relaxation, ⟨B⟩ and rate provider (called with one field value per class)
        weights: Quadrature weights for the reduced observables (ones by default)
        initial: Starting state (ground state by default)
        store_indices: Time indices at which per-class ρ12 and ρ11 are kept

    Returns:
        WindowResult with Σ w·ρ12 and Σ w·ρ11 at every time sample
    """
    field_samples = np.asarray(field_samples, dtype=complex)
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    n_t = field_samples.shape[0]
    n_nodes = deltas.size
    weights = np.ones(n_nodes) if weights is None else np.asarray(weights, dtype=float)
    state = ground_state(n_nodes) if initial is None else initial
    half = midpoint_samples(field_samples)
    coef = EtdCoefficients.build(deltas, dt)
    start_corrections = ctx.corrections

    coherence = np.empty(n_t, dtype=complex)
    population = np.empty(n_t)
    store = set() if store_indices is None else {int(i) for i in store_indices}
    stored_coherence = np.empty((len(store), n_nodes), dtype=complex) if store else None
    stored_population = np.empty((len(store), n_nodes)) if store else None
    store_slot = {index: slot for slot, index in enumerate(sorted(store))}

    def record(index: int, s: QdState) -> None:
        coherence[index] = np.dot(weights, s.rho12)
        population[index] = np.dot(weights, s.rho11)
        if index in store_slot:
            stored_coherence[store_slot[index]] = s.rho12
            stored_population[store_slot[index]] = s.rho11

    def rates_for(omega: complex) -> PhononRates:
        return ctx.rates_at(np.full(n_nodes, omega), n_nodes)

    record(0, state)
    rates_t = rates_for(field_samples[0])
    for i in range(n_t - 1):
        rates_half = rates_for(half[i])
        rates_next = rates_for(field_samples[i + 1])
        state = _rk4_update(
            state,
            (field_samples[i], half[i], field_samples[i + 1]),
            (rates_t, rates_half, rates_next),
            deltas, dt, ctx, coef,
        )
        record(i + 1, state)
        rates_t = rates_next

    return WindowResult(
        coherence=coherence,
        population=population,
        final_state=state,
        stored_coherence=stored_coherence,
        stored_population=stored_population,
        corrections=ctx.corrections - start_corrections,
    )
