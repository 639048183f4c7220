import logging
from typing import TYPE_CHECKING, Dict, Optional, Sequence, Tuple

import numpy as np

from tools.bloch_dynamics.bloch_dynamics import StepContext, integrate_window
from tools.ensemble_medium.ensemble_medium import DetuningEnsemble
from tools.errors import DomainError
from tools.phonon_bath.phonon_bath import PhononBath
from tools.propagation.propagation import ensemble_from_config, rate_table_for, sech_envelope, time_axis

if TYPE_CHECKING:
    from tools.cli_io.config import SimConfig

logger = logging.getLogger(__name__)


def _time_grid(config: "SimConfig") -> Tuple[np.ndarray, float]:
    d_tau = config.pulse.tau0 / config.grids.steps_per_tau0
    return time_axis(config.grids.window, d_tau), d_tau


def _time_index(tau_axis: np.ndarray, time: float) -> int:
    if not tau_axis[0] <= time <= tau_axis[-1]:
        raise DomainError(f"Time {time:.6g} ps lies outside the window [{tau_axis[0]:.6g}, {tau_axis[-1]:.6g}]")
    return int(np.argmin(np.abs(tau_axis - time)))


def step_context_for(config: "SimConfig", ensemble: DetuningEnsemble, peak_field: float, threads: int = 1,
                     cache_dir: Optional[str] = None) -> StepContext:
    """
    Relaxation, ⟨B⟩ and (when phonons are on) a bound rate provider for the ensemble nodes
    """
    if not config.toggles.phonons:
        return StepContext(relax=config.relax, mean_B=1.0)
    bath = PhononBath(config.bath)
    table = rate_table_for(config, ensemble, bath, peak_field, threads=threads, cache_dir=cache_dir)
    bound = table.bind(ensemble.nodes)
    mean_B = bath.mean_B
    return StepContext(relax=config.relax, mean_B=mean_B, rates=lambda omega: bound.rates(mean_B * omega))


def population_vs_area_scan(areas: Sequence[float], observation_time: float, config: "SimConfig",
                            ensemble_average: bool = False, threads: int = 1,
                            cache_dir: Optional[str] = None) -> Dict[str, np.ndarray]:
    """
    Exciton population at the observation time for a range of input pulse areas

    Each area drives a dot at ζ = 0 with the configured sech shape. By default a single
    dot at Δ_c is used and all areas run as one batch; with ensemble_average the
    configured ensemble is driven per area and its averaged population recorded.

    Args:
        areas: Input pulse areas in rad
        observation_time: Time (ps) at which ρ11 is read
        config: Simulation config (pulse width/centre, bath, relaxation, grids)
        ensemble_average: Average over the detuning ensemble instead of one resonant dot
        threads: Worker threads for the rate table
        cache_dir: Rate table cache directory

    Returns:
        Dictionary with "area" and "rho11" arrays
    """
    areas = np.asarray(areas, dtype=float)
    tau_axis, d_tau = _time_grid(config)
    index = _time_index(tau_axis, observation_time)
    unit_row = sech_envelope(1.0, config.pulse.tau0, config.pulse.tau_c, tau_axis)
    peak_field = float(np.max(np.abs(areas))) * float(np.max(np.abs(unit_row)))
    peak_field = max(peak_field, 1.0e-6)

    if not ensemble_average:
        # one resonant dot per area, batched
        deltas = np.full(areas.size, config.ensemble.delta_c)
        batch = DetuningEnsemble(nodes=deltas, weights=np.full(areas.size, 1.0 / areas.size), sigma=0.0,
                                 delta_c=config.ensemble.delta_c, quadrature="single")
        ctx = step_context_for(config, batch, peak_field, threads, cache_dir)
        fields = unit_row[:, None] * areas[None, :]
        result = integrate_window(fields, d_tau, deltas, ctx, store_indices=np.array([index]))
        rho11 = result.stored_population[0]
    else:
        ensemble = ensemble_from_config(config)
        ctx = step_context_for(config, ensemble, peak_field, threads, cache_dir)
        rho11 = np.empty(areas.size)
        for k, area in enumerate(areas):
            result = integrate_window(area * unit_row, d_tau, ensemble.nodes, ctx, weights=ensemble.weights)
            rho11[k] = result.population[index]

    logger.info("Population scan over %d areas at tau = %.4g ps", areas.size, tau_axis[index])
    return {"area": areas, "rho11": np.asarray(rho11, dtype=float)}


def coherence_spectrum_scan(times: Sequence[float], config: "SimConfig", threads: int = 1,
                            cache_dir: Optional[str] = None) -> Dict[str, np.ndarray]:
    """
    Coherence ρ12(Δ) across the ensemble at ζ = 0 at the requested times

    Args:
        times: Observation times in ps
        config: Simulation config
        threads: Worker threads for the rate table
        cache_dir: Rate table cache directory

    Returns:
        Dictionary with "delta" (n_nodes,), "time" (n_times,) and "rho12" (n_times, n_nodes)
    """
    tau_axis, d_tau = _time_grid(config)
    indices = np.array([_time_index(tau_axis, t) for t in times], dtype=int)
    row = sech_envelope(config.pulse.theta0, config.pulse.tau0, config.pulse.tau_c, tau_axis)
    ensemble = ensemble_from_config(config)
    ctx = step_context_for(config, ensemble, float(np.max(np.abs(row))), threads, cache_dir)
    result = integrate_window(row, d_tau, ensemble.nodes, ctx, weights=ensemble.weights,
                              store_indices=np.unique(indices))
    slots = {index: slot for slot, index in enumerate(np.unique(indices))}
    coherence = np.array([result.stored_coherence[slots[i]] for i in indices])
    return {"delta": ensemble.nodes.copy(), "time": tau_axis[indices], "rho12": coherence}
