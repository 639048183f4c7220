import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from tools.analysis.analysis import pulse_area
from tools.bloch_dynamics.bloch_dynamics import RelaxationParams, StepContext, WindowResult, integrate_window
from tools.ensemble_medium.ensemble_medium import (
    DEFAULT_GAUSS_HERMITE_NODES,
    DetuningEnsemble,
    build_ensemble,
    build_uniform_ensemble,
    gaussian_profile,
    single_dot,
)
from tools.errors import ConfigError, DomainError, NumericalError, ValidityBoundError
from tools.phonon_bath.phonon_bath import PhononBath, polaron_validity_report
from tools.polaron_rates.polaron_rates import PhononRates
from tools.polaron_rates.rate_table import (
    BoundRates,
    RateTable,
    build_rate_table,
    load_rate_table,
    save_rate_table,
    table_hash,
)
from tools.units.units import nm_to_mm, per_cubic_metre_to_per_cubic_mm, transition_wavelength

if TYPE_CHECKING:
    from tools.cli_io.config import SimConfig

logger = logging.getLogger(__name__)

# Detuning classes handed to one worker; fixed so that sums do not depend on the thread count
NODE_CHUNK = 256
# A slice whose pulse energy grows by more than this factor is numerically unstable
ENERGY_GROWTH_LIMIT = 10.0


def _check_uniform(axis: np.ndarray, name: str) -> None:
    if axis.size < 2:
        return
    steps = np.diff(axis)
    if np.any(steps <= 0):
        raise DomainError(f"{name} axis must be strictly ascending")
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise DomainError(f"{name} axis must be uniform")


@dataclass
class FieldGrid:
    """
    Complex envelope Ω(ζ, τ) on uniform space and retarded-time axes.

    envelope has shape (n_zeta, n_tau); row i is the pulse after zeta_axis[i] mm.
    """

    zeta_axis: np.ndarray
    tau_axis: np.ndarray
    envelope: np.ndarray

    def __post_init__(self):
        _check_uniform(self.zeta_axis, "zeta")
        _check_uniform(self.tau_axis, "tau")
        if self.envelope.shape != (self.zeta_axis.size, self.tau_axis.size):
            raise DomainError(
                f"Envelope shape {self.envelope.shape} does not match axes "
                f"({self.zeta_axis.size}, {self.tau_axis.size})"
            )
        if not np.all(np.isfinite(self.envelope)):
            raise NumericalError("Envelope contains non-finite values")

    @property
    def d_tau(self) -> float:
        return float(self.tau_axis[1] - self.tau_axis[0])

    @property
    def output(self) -> np.ndarray:
        return self.envelope[-1]


def coupling_constant(density: float, wavelength_nm: float, gamma: float) -> float:
    """
    Light–matter coupling η = 3Nλ²γ/4π

    Args:
        density: Dot density N in m⁻³
        wavelength_nm: Carrier wavelength λ in nm
        gamma: Radiative decay rate in rad/ps

    Returns:
        η in mm⁻¹·rad/ps
    """
    if density < 0 or not wavelength_nm > 0 or gamma < 0:
        raise DomainError(
            f"coupling_constant needs N >= 0, lambda > 0, gamma >= 0 (got {density}, {wavelength_nm}, {gamma})"
        )
    n_mm = per_cubic_metre_to_per_cubic_mm(density)
    wavelength_mm = nm_to_mm(wavelength_nm)
    return 3.0 * n_mm * wavelength_mm ** 2 * gamma / (4.0 * np.pi)


@dataclass(frozen=True)
class MediumParams:
    """
    The quantum dot medium seen by the pulse.

    polarization_factor k scales the source −i·k·η·Σw·ρ12. With k = 2 the pulse
    area obeys dΘ/dζ = −(α/2)·sin Θ with α = 2πηg(0).
    """

    density: float = 5.0e20
    length: float = 1.0
    wavelength_nm: float = 953.72
    gamma: float = 0.0005
    sigma: float = 15.16
    polarization_factor: float = 2.0

    def __post_init__(self):
        if self.density < 0:
            raise DomainError(f"density must be >= 0, got {self.density}")
        if self.length < 0:
            raise DomainError(f"length must be >= 0, got {self.length}")
        if not self.polarization_factor > 0:
            raise DomainError(f"polarization_factor must be > 0, got {self.polarization_factor}")

    @property
    def eta(self) -> float:
        return coupling_constant(self.density, self.wavelength_nm, self.gamma)

    @property
    def alpha(self) -> float:
        return self.extinction(self.sigma)

    def extinction(self, sigma: float) -> float:
        """
        α = 2π·η·g(0) for a Gaussian of standard deviation sigma
        """
        if sigma == 0:
            return np.inf if self.eta > 0 else 0.0
        return 2.0 * np.pi * self.eta * gaussian_profile(0.0, sigma)

    @classmethod
    def from_config(cls, config: "SimConfig") -> "MediumParams":
        return cls(
            density=config.medium.density,
            length=config.medium.length,
            wavelength_nm=transition_wavelength(config.medium.energy_ev),
            gamma=config.relax.gamma,
            sigma=0.0 if config.toggles.single_qd else config.ensemble.sigma,
            polarization_factor=config.medium.polarization_factor,
        )


def sech_envelope(theta0: float, tau0: float, tau_c: float, tau_axis: np.ndarray) -> np.ndarray:
    """
    Hyperbolic-secant input pulse Ω₀·sech((τ − τ_c)/τ₀) with Ω₀ = θ₀/(πτ₀)

    Args:
        theta0: Pulse area in rad
        tau0: Pulse width in ps (> 0)
        tau_c: Pulse centre in ps
        tau_axis: Retarded-time samples

    Returns:
        Complex envelope row
    """
    if not tau0 > 0:
        raise DomainError(f"tau0 must be > 0, got {tau0}")
    omega0 = theta0 / (np.pi * tau0)
    # 1/cosh written via exp(-|x|) stays finite far in the wings
    x = np.abs((np.asarray(tau_axis, dtype=float) - tau_c) / tau0)
    sech = 2.0 * np.exp(-x) / (1.0 + np.exp(-2.0 * x))
    return (omega0 * sech).astype(complex)


def time_axis(window: float, d_tau: float) -> np.ndarray:
    """
    Uniform retarded-time axis [0, window] with spacing d_tau
    """
    n_steps = int(round(window / d_tau))
    return np.arange(n_steps + 1) * d_tau


SourceFunction = Callable[[np.ndarray], np.ndarray]


def _check_source(source: np.ndarray, zeta: float, tau_axis: Optional[np.ndarray]) -> None:
    bad = ~np.isfinite(source)
    if np.any(bad):
        index = int(np.argmax(bad))
        tau = tau_axis[index] if tau_axis is not None else float(index)
        raise NumericalError(f"Non-finite polarization source at zeta = {zeta:.6g} mm, tau = {tau:.6g} ps")


def advance_slice(column: np.ndarray, d_zeta: float, source: SourceFunction, zeta: float = 0.0,
                  tau_axis: Optional[np.ndarray] = None) -> np.ndarray:
    """
    One Heun (predictor–corrector) step of dΩ/dζ = S[Ω]

    Args:
        column: Envelope at ζ over the whole τ-window
        d_zeta: Step in mm
        source: Maps an envelope to the polarization source, evolving the ensemble through it
        zeta: Position of column (diagnostics only)
        tau_axis: Time axis (diagnostics only)

    Returns:
        Envelope at ζ + dζ
    """
    source_now = source(column)
    _check_source(source_now, zeta, tau_axis)
    predicted = column + d_zeta * source_now
    source_predicted = source(predicted)
    _check_source(source_predicted, zeta + d_zeta, tau_axis)
    return column + 0.5 * d_zeta * (source_now + source_predicted)


@dataclass
class PropagationResult:
    """
    Output of a run: the space-time envelope and per-slice observables
    """

    grid: FieldGrid
    areas: np.ndarray
    peak_values: np.ndarray
    peak_times: np.ndarray
    energies: np.ndarray
    medium: MediumParams
    ensemble: DetuningEnsemble
    mean_B: float
    validity: Dict[str, Any]
    stored_zeta: np.ndarray = field(default_factory=lambda: np.empty(0))
    stored_coherence: Optional[np.ndarray] = None
    stored_population: Optional[np.ndarray] = None
    corrections: int = 0

    @property
    def input_area(self) -> float:
        return float(self.areas[0])

    @property
    def output_area(self) -> float:
        return float(self.areas[-1])


def _rate_provider(bound: BoundRates, mean_B: float) -> Callable[[np.ndarray], PhononRates]:
    def rates(omega: np.ndarray) -> PhononRates:
        return bound.rates(mean_B * omega)
    return rates


class EnsembleMedium:
    """
    Evolves the detuning classes of one slice through a field and returns the source.

    Nodes are split into fixed chunks; chunks run on a thread pool and their partial
    sums are combined in chunk order.
    """

    def __init__(self, ensemble: DetuningEnsemble, relax: RelaxationParams, medium: MediumParams,
                 d_tau: float, mean_B: float = 1.0, table: Optional[RateTable] = None, threads: int = 1):
        """
        Initialize the EnsembleMedium

        Args:
            ensemble: Detuning discretization
            relax: Radiative decay and pure dephasing
            medium: Density, wavelength and polarization factor
            d_tau: Time step
            mean_B: ⟨B⟩ (1 without phonons)
            table: Rate table, or None to run without phonons
            threads: Worker threads
        """
        self.ensemble = ensemble
        self.relax = relax
        self.medium = medium
        self.d_tau = d_tau
        self.mean_B = mean_B
        self.threads = max(1, threads)
        self.corrections = 0
        self._chunks: List[Tuple[slice, StepContext]] = []
        for start in range(0, ensemble.size, NODE_CHUNK):
            part = slice(start, min(start + NODE_CHUNK, ensemble.size))
            provider = None if table is None else _rate_provider(table.bind(ensemble.nodes[part]), mean_B)
            self._chunks.append((part, StepContext(relax=relax, mean_B=mean_B, rates=provider)))

    def _run_chunk(self, chunk: Tuple[slice, StepContext], column: np.ndarray,
                   store_indices: Optional[np.ndarray]) -> WindowResult:
        part, ctx = chunk
        local = replace(ctx, corrections=0)
        return integrate_window(column, self.d_tau, self.ensemble.nodes[part], local,
                                weights=self.ensemble.weights[part], store_indices=store_indices)

    def respond(self, column: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Ensemble-averaged coherence and population over the τ-window driven by column
        """
        if len(self._chunks) == 1 or self.threads == 1:
            results = [self._run_chunk(chunk, column, None) for chunk in self._chunks]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                results = list(executor.map(lambda c: self._run_chunk(c, column, None), self._chunks))
        coherence = np.zeros(column.size, dtype=complex)
        population = np.zeros(column.size)
        for result in results:
            coherence += result.coherence
            population += result.population
            self.corrections += result.corrections
        return coherence, population

    def source(self, column: np.ndarray) -> np.ndarray:
        """
        Polarization source −i·k·η·Σ_k w_k·ρ12(Δ_k, τ)
        """
        coherence, _ = self.respond(column)
        return -1j * self.medium.polarization_factor * self.medium.eta * coherence


def ensemble_from_config(config: "SimConfig") -> DetuningEnsemble:
    """
    Detuning discretization selected by the configuration
    """
    if config.toggles.single_qd:
        return single_dot(config.ensemble.delta_c)
    if config.ensemble.quadrature == "gauss_hermite":
        n_nodes = config.ensemble.n_nodes or DEFAULT_GAUSS_HERMITE_NODES
        return build_ensemble(config.ensemble.sigma, config.ensemble.delta_c, n_nodes)
    n_nodes = config.ensemble.n_nodes if config.ensemble.n_nodes > 0 else None
    return build_uniform_ensemble(config.ensemble.sigma, config.ensemble.delta_c, n_nodes=n_nodes,
                                  window=config.grids.window, span_sigmas=config.ensemble.span_sigmas)


def rate_table_for(config: "SimConfig", ensemble: DetuningEnsemble, bath: PhononBath, peak_field: float,
                   threads: int = 1, progress: bool = False, cache_dir: Optional[str] = None) -> RateTable:
    """
    Build (or load from the cache) a rate table covering the run's field and detuning range
    """
    corr = bath.correlation_table()
    field_max = bath.mean_B * config.grids.field_headroom * peak_field
    offsets = np.abs(ensemble.nodes - ensemble.delta_c)
    # a lone dot still needs a non-degenerate detuning axis
    delta_span = max(float(offsets.max()), bath.params.omega_b) * (1.0 + 1.0e-9)
    resolution = (config.grids.table_omega, config.grids.table_delta)

    cache_path = None
    if cache_dir:
        key = table_hash(corr, field_max, delta_span, resolution, ensemble.delta_c)
        cache_path = os.path.join(cache_dir, f"rates_{key[:16]}.bin")
        cached = load_rate_table(cache_path, expected_key=key)
        if cached is not None:
            return cached

    table = build_rate_table(field_max, delta_span, corr, resolution, delta_center=ensemble.delta_c,
                             threads=threads, progress=progress)
    if cache_path:
        save_rate_table(table, cache_path)
    return table


def slice_count(medium: MediumParams, alpha_dz: float, d_zeta: float = 0.0) -> int:
    """
    Number of ζ-slices for the medium length

    An explicit d_zeta wins; otherwise α·dζ <= alpha_dz. A medium without extinction
    still gets one slice so the frame itself is exercised.
    """
    if medium.length == 0:
        return 0
    if d_zeta > 0:
        return int(math.ceil(medium.length / d_zeta - 1e-9))
    alpha = medium.alpha
    if not np.isfinite(alpha):
        raise ConfigError("single-dot propagation needs an explicit slice length", key="grids.d_zeta")
    return max(1, int(math.ceil(alpha * medium.length / alpha_dz - 1e-9)))


def run_simulation(config: "SimConfig", threads: int = 1, progress: bool = False,
                   cache_dir: Optional[str] = None) -> PropagationResult:
    """
    Propagate the configured sech pulse through the quantum dot medium

    Args:
        config: Validated simulation config
        threads: Worker threads for rate tables and detuning chunks
        progress: Show progress bars
        cache_dir: Directory for rate table caches (None disables caching)

    Returns:
        PropagationResult

    Raises:
        ValidityBoundError: the polaron validity metric reaches 1
        NumericalError: non-finite field or runaway slice energy
    """
    medium = MediumParams.from_config(config)
    d_tau = config.pulse.tau0 / config.grids.steps_per_tau0
    tau_axis = time_axis(config.grids.window, d_tau)
    column = sech_envelope(config.pulse.theta0, config.pulse.tau0, config.pulse.tau_c, tau_axis)
    peak_field = float(np.max(np.abs(column)))
    ensemble = ensemble_from_config(config)
    logger.info("Ensemble: %d nodes (%s), eta = %.4g mm^-1 rad/ps, alpha = %.4g mm^-1",
                ensemble.size, ensemble.quadrature, medium.eta, medium.alpha)

    mean_B = 1.0
    table = None
    validity: Dict[str, Any] = {"metric": 0.0, "status": "ok", "omega_peak": peak_field}
    if config.toggles.phonons:
        bath = PhononBath(config.bath)
        mean_B = bath.mean_B
        validity = polaron_validity_report(peak_field, config.bath, mean_B)
        if validity["status"] == "violation":
            raise ValidityBoundError(
                f"Polaron validity metric {validity['metric']:.3g} >= 1 for peak field {peak_field:.4g} rad/ps"
            )
        if validity["status"] == "warning":
            logger.warning("Polaron validity metric %.3g exceeds the 0.1 warning threshold", validity["metric"])
        table = rate_table_for(config, ensemble, bath, peak_field, threads, progress, cache_dir)

    n_slices = slice_count(medium, config.grids.alpha_dz, config.grids.d_zeta)
    d_zeta = medium.length / n_slices if n_slices else 0.0
    zeta_axis = np.arange(n_slices + 1) * d_zeta
    rows = np.empty((n_slices + 1, tau_axis.size), dtype=complex)
    rows[0] = column

    slab = EnsembleMedium(ensemble, config.relax, medium, d_tau, mean_B, table, threads)
    stride = config.output.slice_stride
    stored_zeta, stored_coherence, stored_population = [], [], []

    def store(index: int, current: np.ndarray) -> None:
        if stride > 0 and index % stride == 0:
            coherence, population = slab.respond(current)
            stored_zeta.append(zeta_axis[index])
            stored_coherence.append(coherence)
            stored_population.append(population)

    energy = float(np.sum(np.abs(column) ** 2) * d_tau)
    store(0, column)
    for n in tqdm(range(n_slices), desc="Propagation", disable=not progress):
        column = advance_slice(column, d_zeta, slab.source, zeta=zeta_axis[n], tau_axis=tau_axis)
        new_energy = float(np.sum(np.abs(column) ** 2) * d_tau)
        if energy > 0 and new_energy > ENERGY_GROWTH_LIMIT * energy:
            raise NumericalError(
                f"Pulse energy grew {new_energy / energy:.3g}x between zeta = {zeta_axis[n]:.4g} and "
                f"{zeta_axis[n + 1]:.4g} mm; reduce grids.alpha_dz or increase grids.steps_per_tau0"
            )
        energy = new_energy
        rows[n + 1] = column
        store(n + 1, column)

    magnitudes = np.abs(rows)
    peak_index = np.argmax(magnitudes, axis=1)
    result = PropagationResult(
        grid=FieldGrid(zeta_axis=zeta_axis, tau_axis=tau_axis, envelope=rows),
        areas=np.array([pulse_area(row, tau_axis) for row in rows]),
        peak_values=magnitudes[np.arange(rows.shape[0]), peak_index],
        peak_times=tau_axis[peak_index],
        energies=np.sum(magnitudes ** 2, axis=1) * d_tau,
        medium=medium,
        ensemble=ensemble,
        mean_B=mean_B,
        validity=validity,
        stored_zeta=np.array(stored_zeta),
        stored_coherence=np.array(stored_coherence) if stored_coherence else None,
        stored_population=np.array(stored_population) if stored_population else None,
        corrections=slab.corrections,
    )
    if slab.corrections:
        logger.info("Renormalized density matrix trace %d times", slab.corrections)
    logger.info("Propagated %d slices over %.4g mm: area %.4f -> %.4f rad",
                n_slices, medium.length, result.input_area, result.output_area)
    return result
