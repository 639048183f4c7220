import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from tools.analysis.analysis import (
    delay_estimate,
    detect_peaks,
    measure_delay,
    sit_area_estimate,
)
from tools.analysis.scans import coherence_spectrum_scan, population_vs_area_scan
from tools.cli_io.config import SimConfig, config_hash, describe, override
from tools.cli_io.writer import CODE_VERSION, write_heatmap, write_manifest, write_table
from tools.errors import ConfigError
from tools.phonon_bath.phonon_bath import PhononBath, polaron_validity_report
from tools.polaron_rates.polaron_rates import rate_map
from tools.propagation.propagation import MediumParams, PropagationResult, run_simulation, sech_envelope
from tools.units.units import GAMMA_N

logger = logging.getLogger(__name__)


@dataclass
class RunOptions:
    """
    Command-line options shared by every run
    """

    out_dir: Optional[str] = None
    threads: int = 1
    progress: bool = False
    cache_dir: Optional[str] = None
    phonons: Optional[bool] = None


@dataclass
class PresetOutput:
    files: List[str] = field(default_factory=list)
    runs: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    runner: Callable[[SimConfig, str, RunOptions], PresetOutput]


def output_root(config: SimConfig, options: RunOptions) -> str:
    """
    Directory run outputs go under: the command-line choice, else output.directory of the config
    """
    return options.out_dir or config.output.directory


def _apply_options(config: SimConfig, options: RunOptions) -> SimConfig:
    if options.phonons is None:
        return config
    return override(config, **{"toggles.phonons": options.phonons})


def _simulate(config: SimConfig, options: RunOptions, label: str, output: PresetOutput) -> PropagationResult:
    logger.info("Running %s", label)
    result = run_simulation(config, threads=options.threads, progress=options.progress, cache_dir=options.cache_dir)
    output.runs.append({
        "label": label,
        "config_hash": config_hash(config),
        "validity": result.validity,
        "slices": int(result.grid.zeta_axis.size - 1),
        "alpha_per_mm": result.medium.alpha,
        "eta": result.medium.eta,
        "mean_B": result.mean_B,
        "input_area": result.input_area,
        "output_area": result.output_area,
        "trace_corrections": result.corrections,
    })
    return result


def _temperature_variants(config: SimConfig) -> Dict[str, SimConfig]:
    variants = {"no_phonons": override(config, **{"toggles.phonons": False})}
    if config.toggles.phonons:
        for temperature in (4.2, 10.0, 20.0):
            variants[f"T_{temperature:g}K"] = override(config, **{"bath.temperature": temperature})
    return variants


def slice_metrics_table(result: PropagationResult, path: str, title: str, digest: str) -> str:
    """
    Per-slice area, peak and energy of a propagation run
    """
    return write_table(
        path,
        {
            "zeta": result.grid.zeta_axis,
            "alpha_zeta": result.grid.zeta_axis * result.medium.alpha,
            "area": result.areas,
            "peak": result.peak_values,
            "peak_time": result.peak_times,
            "energy": result.energies,
        },
        {"zeta": "mm", "alpha_zeta": "", "area": "rad", "peak": "rad/ps", "peak_time": "ps", "energy": "rad^2/ps"},
        title, digest,
    )


def _rows_at(result: PropagationResult, alpha_zetas) -> Dict[float, int]:
    alpha_axis = result.grid.zeta_axis * result.medium.alpha
    return {az: int(np.argmin(np.abs(alpha_axis - az))) for az in alpha_zetas}


def run_fig2(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Phonon rate maps over detuning and time for the input 2π pulse
    """
    output = PresetOutput()
    digest = config_hash(config)
    times = np.linspace(20.0, 60.0, 81) / GAMMA_N
    deltas = np.linspace(-15.0, 15.0, 61) * GAMMA_N
    bath = PhononBath(config.bath)
    field_row = sech_envelope(config.pulse.theta0, config.pulse.tau0, config.pulse.tau_c, times)
    maps = rate_map(field_row, deltas, bath.correlation_table())
    for name in ("gamma_plus", "gamma_minus", "gamma_cd", "delta_pm"):
        output.files.append(write_heatmap(
            os.path.join(out_dir, f"{name}.csv"), times, deltas, maps[name], f"{name} at zeta = 0",
            "tau [ps]", "delta [rad/ps]", "rad/ps", digest, {"mean_B": bath.mean_B},
        ))
    output.runs.append({"label": "rate_maps", "config_hash": digest,
                        "validity": polaron_validity_report(float(np.max(np.abs(field_row))), config.bath,
                                                            bath.mean_B)})
    gamma_plus = maps["gamma_plus"]
    _, column = np.unravel_index(np.argmax(gamma_plus), gamma_plus.shape)
    output.summary["gamma_plus_argmax_delta"] = float(deltas[column])
    _, column = np.unravel_index(np.argmax(maps["gamma_minus"]), gamma_plus.shape)
    output.summary["gamma_minus_argmax_delta"] = float(deltas[column])
    return output


def run_fig3(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Pulse area against distance for a 2π pulse, without phonons and at three temperatures
    """
    output = PresetOutput()
    columns: Dict[str, np.ndarray] = {}
    units: Dict[str, str] = {"zeta": "mm"}
    for label, variant in _temperature_variants(config).items():
        result = _simulate(variant, options, label, output)
        columns.setdefault("zeta", result.grid.zeta_axis)
        columns[f"area_{label}"] = result.areas
        units[f"area_{label}"] = "rad"
    output.files.append(write_table(os.path.join(out_dir, "area_vs_zeta.csv"), columns, units,
                                    "pulse area against propagation distance", config_hash(config)))
    output.summary["sit_area_estimate"] = sit_area_estimate(config.pulse.tau0, config.relax.t2_prime)
    return output


def run_fig4(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Real and imaginary coherence across detuning at several times, ζ = 0
    """
    output = PresetOutput()
    scan_config = override(config, **{
        "ensemble.quadrature": "uniform",
        "ensemble.n_nodes": 301,
        "ensemble.span_sigmas": 15.0 * GAMMA_N / config.ensemble.sigma,
    })
    times = [20.0, 30.0, 40.0, 50.0, 60.0]
    scan = coherence_spectrum_scan(times, scan_config, threads=options.threads, cache_dir=options.cache_dir)
    columns = {"delta": scan["delta"]}
    units = {"delta": "rad/ps"}
    for t, row in zip(scan["time"], scan["rho12"]):
        columns[f"re_t{t:g}"] = row.real
        columns[f"im_t{t:g}"] = row.imag
        units[f"re_t{t:g}"] = units[f"im_t{t:g}"] = ""
    output.files.append(write_table(os.path.join(out_dir, "coherence_spectrum.csv"), columns, units,
                                    "coherence across detuning at zeta = 0", config_hash(scan_config)))
    output.runs.append({"label": "coherence_spectrum", "config_hash": config_hash(scan_config)})
    return output


def run_fig5(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Exciton population at the end of the pulse against input area, 0..6π
    """
    output = PresetOutput()
    areas = np.linspace(0.0, 6.0 * np.pi, 121)
    observation = 60.0 / GAMMA_N
    single = population_vs_area_scan(areas, observation, config, threads=options.threads,
                                     cache_dir=options.cache_dir)
    ensemble_config = override(config, **{"ensemble.quadrature": "gauss_hermite", "ensemble.n_nodes": 63})
    averaged = population_vs_area_scan(areas, observation, ensemble_config, ensemble_average=True,
                                       threads=options.threads, cache_dir=options.cache_dir)
    output.files.append(write_table(
        os.path.join(out_dir, "population_vs_area.csv"),
        {"area": areas, "area_over_pi": areas / np.pi, "rho11_single": single["rho11"],
         "rho11_ensemble": averaged["rho11"]},
        {"area": "rad", "area_over_pi": "", "rho11_single": "", "rho11_ensemble": ""},
        "exciton population against input pulse area", config_hash(config),
        {"observation_time_ps": observation},
    ))
    output.runs.append({"label": "population_scan", "config_hash": config_hash(config)})
    return output


def _envelope_snapshots(config: SimConfig, out_dir: str, options: RunOptions, individual: bool) -> PresetOutput:
    output = PresetOutput()
    digest = config_hash(config)
    result = _simulate(config, options, "sit_2pi", output)
    snapshots = _rows_at(result, (0.0, 2.5, 5.0, 7.5, 10.0))
    input_peak = result.peak_values[0]
    columns: Dict[str, np.ndarray] = {"tau": result.grid.tau_axis}
    units = {"tau": "ps"}
    for alpha_zeta, index in snapshots.items():
        magnitude = np.abs(result.grid.envelope[index])
        scale = result.peak_values[index] if individual else input_peak
        columns[f"az_{alpha_zeta:g}"] = magnitude / scale if scale > 0 else magnitude
        units[f"az_{alpha_zeta:g}"] = ""
    name = "envelopes_individual.csv" if individual else "envelopes.csv"
    output.files.append(write_table(os.path.join(out_dir, name), columns, units,
                                    "normalized envelope at several distances", digest))
    output.files.append(slice_metrics_table(result, os.path.join(out_dir, "slices.csv"),
                                            "per-slice pulse metrics", digest))
    output.summary["measured_delay_ps"] = measure_delay(result.grid.envelope[0], result.grid.output,
                                                        result.grid.tau_axis)
    output.summary["delay_estimate_ps"] = delay_estimate(
        result.medium.polarization_factor * result.medium.alpha, result.medium.length, config.pulse.tau0)
    return output


def run_fig6(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    2π soliton normalized to the input peak at several distances
    """
    return _envelope_snapshots(config, out_dir, options, individual=False)


def run_fig7(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    2π soliton normalized to each distance's own peak (delay and broadening)
    """
    return _envelope_snapshots(config, out_dir, options, individual=True)


def _output_rows(variants: Dict[str, SimConfig], out_dir: str, options: RunOptions, filename: str, title: str,
                 normalize: bool, digest: str) -> PresetOutput:
    output = PresetOutput()
    columns: Dict[str, np.ndarray] = {}
    units: Dict[str, str] = {"tau": "ps"}
    for label, variant in variants.items():
        result = _simulate(variant, options, label, output)
        columns.setdefault("tau", result.grid.tau_axis)
        magnitude = np.abs(result.grid.output)
        columns[label] = magnitude / result.peak_values[0] if normalize else magnitude
        units[label] = "" if normalize else "rad/ps"
        output.summary[f"{label}_peak_time_ps"] = float(result.peak_times[-1])
    output.files.append(write_table(os.path.join(out_dir, filename), columns, units, title, digest))
    return output


def run_fig8(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Output pulse for three inhomogeneous widths σ/γ_n ∈ {10, 15, 20}
    """
    variants = {f"sigma_{s:g}": override(config, **{"ensemble.sigma": s * GAMMA_N}) for s in (10.0, 15.0, 20.0)}
    return _output_rows(variants, out_dir, options, "output_vs_sigma.csv",
                        "output envelope normalized to the input peak", True, config_hash(config))


def _distance_50(config: SimConfig) -> SimConfig:
    # distance quoted as ζη/γ_n
    eta = MediumParams.from_config(config).eta
    return override(config, **{"medium.length": 50.0 * GAMMA_N / eta})


def run_fig9(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Envelope at ζη/γ_n = 50 without phonons and at three temperatures
    """
    base = _distance_50(config)
    return _output_rows(_temperature_variants(base), out_dir, options, "output_vs_temperature.csv",
                        "envelope at zeta*eta/gamma_n = 50", False, config_hash(base))


def run_fig10(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Envelope at ζη/γ_n = 50 for three electron-phonon couplings at 4.2 K
    """
    base = override(_distance_50(config), **{"bath.temperature": 4.2})
    variants = {f"alpha_p_{a:g}": override(base, **{"bath.alpha_p": a}) for a in (0.03, 0.06, 0.12)}
    return _output_rows(variants, out_dir, options, "output_vs_coupling.csv",
                        "envelope at zeta*eta/gamma_n = 50", False, config_hash(base))


def run_fig11(config: SimConfig, out_dir: str, options: RunOptions) -> PresetOutput:
    """
    Space-time envelope of a 4π pulse breaking into two solitons
    """
    output = PresetOutput()
    config = override(config, **{"pulse.theta0": 4.0 * np.pi})
    digest = config_hash(config)
    result = _simulate(config, options, "breakup_4pi", output)
    output.files.append(write_heatmap(
        os.path.join(out_dir, "envelope_4pi.csv"), result.grid.zeta_axis, result.grid.tau_axis,
        np.abs(result.grid.envelope), "|Omega|(zeta, tau) for a 4pi input", "zeta [mm]", "tau [ps]", "rad/ps", digest,
    ))
    output.files.append(slice_metrics_table(result, os.path.join(out_dir, "slices.csv"),
                                            "per-slice pulse metrics", digest))
    metrics = detect_peaks(result.grid.output, result.grid.tau_axis)
    output.summary["output_peak_count"] = metrics.peak_count
    output.summary["output_sub_pulse_areas"] = metrics.sub_pulse_areas
    output.summary["output_peak_times"] = metrics.peak_times
    return output


PRESETS: Dict[str, Preset] = {
    "fig2": Preset("fig2", "phonon rate maps over detuning and time", run_fig2),
    "fig3": Preset("fig3", "2pi pulse area against distance for several temperatures", run_fig3),
    "fig4": Preset("fig4", "coherence spectrum at several times", run_fig4),
    "fig5": Preset("fig5", "exciton population against input pulse area", run_fig5),
    "fig6": Preset("fig6", "2pi soliton normalized to the input peak", run_fig6),
    "fig7": Preset("fig7", "2pi soliton normalized to each peak", run_fig7),
    "fig8": Preset("fig8", "output pulse for three inhomogeneous widths", run_fig8),
    "fig9": Preset("fig9", "output pulse for several temperatures", run_fig9),
    "fig10": Preset("fig10", "output pulse for several phonon couplings", run_fig10),
    "fig11": Preset("fig11", "4pi pulse breakup in space and time", run_fig11),
}


def list_presets() -> List[str]:
    return list(PRESETS)


def _manifest(name: str, config: SimConfig, output: PresetOutput, wall_time: float) -> Dict[str, Any]:
    warnings = [f"{run['label']}: polaron validity metric {run['validity']['metric']:.3g}"
                for run in output.runs
                if run.get("validity", {}).get("status") in ("warning", "violation")]
    return {
        "name": name,
        "config_hash": config_hash(config),
        "config": {key: {"value": value, "unit": unit} for key, (value, unit) in describe(config).items()},
        "code_version": CODE_VERSION,
        "wall_time_s": round(wall_time, 3),
        "files": [os.path.basename(p) for p in output.files],
        "runs": output.runs,
        "summary": output.summary,
        "warnings": warnings,
    }


def run_preset(name: str, config: Optional[SimConfig] = None, options: Optional[RunOptions] = None) -> PresetOutput:
    """
    Run one named scenario and write its data files and manifest

    Args:
        name: Preset name (see list_presets)
        config: Base config (defaults when omitted)
        options: Output directory, threads and overrides

    Returns:
        PresetOutput with the written files
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})", key="preset")
    options = options or RunOptions()
    config = _apply_options(config or SimConfig(), options)
    out_dir = os.path.join(output_root(config, options), name)
    started = time.perf_counter()
    output = PRESETS[name].runner(config, out_dir, options)
    manifest = _manifest(name, config, output, time.perf_counter() - started)
    output.files.append(write_manifest(os.path.join(out_dir, "manifest.json"), manifest))
    return output


def run_config(config: SimConfig, options: Optional[RunOptions] = None, name: str = "run") -> PresetOutput:
    """
    Propagate one configured pulse and write its envelope, slice metrics and manifest
    """
    options = options or RunOptions()
    config = _apply_options(config, options)
    out_dir = os.path.join(output_root(config, options), name)
    digest = config_hash(config)
    started = time.perf_counter()
    output = PresetOutput()
    result = _simulate(config, options, name, output)

    output.files.append(write_heatmap(
        os.path.join(out_dir, "envelope_abs.csv"), result.grid.zeta_axis, result.grid.tau_axis,
        np.abs(result.grid.envelope), "|Omega|(zeta, tau)", "zeta [mm]", "tau [ps]", "rad/ps", digest,
    ))
    output.files.append(write_heatmap(
        os.path.join(out_dir, "envelope_phase.csv"), result.grid.zeta_axis, result.grid.tau_axis,
        np.angle(result.grid.envelope), "arg Omega(zeta, tau)", "zeta [mm]", "tau [ps]", "rad", digest,
    ))
    output.files.append(slice_metrics_table(result, os.path.join(out_dir, "slices.csv"),
                                            "per-slice pulse metrics", digest))
    if result.stored_coherence is not None:
        for label, values in (("coherence_re", result.stored_coherence.real),
                              ("coherence_im", result.stored_coherence.imag),
                              ("population", result.stored_population)):
            output.files.append(write_heatmap(
                os.path.join(out_dir, f"{label}.csv"), result.stored_zeta, result.grid.tau_axis, values,
                f"ensemble-averaged {label.replace('_', ' ')}", "zeta [mm]", "tau [ps]", "", digest,
            ))
    metrics = detect_peaks(result.grid.output, result.grid.tau_axis)
    output.summary.update({
        "output_peak_count": metrics.peak_count,
        "output_fwhm_ps": metrics.fwhm,
        "measured_delay_ps": measure_delay(result.grid.envelope[0], result.grid.output, result.grid.tau_axis),
    })
    manifest = _manifest(name, config, output, time.perf_counter() - started)
    output.files.append(write_manifest(os.path.join(out_dir, "manifest.json"), manifest))
    return output
