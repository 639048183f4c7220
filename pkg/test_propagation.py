import math

import numpy as np
import pytest

from tools.analysis.analysis import area_theorem_solution, pulse_area
from tools.bloch_dynamics.bloch_dynamics import RelaxationParams
from tools.cli_io.config import SimConfig, override
from tools.ensemble_medium.ensemble_medium import build_uniform_ensemble
from tools.errors import ConfigError, DomainError, NumericalError, ValidityBoundError
from tools.propagation.propagation import (
    EnsembleMedium,
    FieldGrid,
    MediumParams,
    advance_slice,
    coupling_constant,
    run_simulation,
    sech_envelope,
    slice_count,
    time_axis,
)

# Narrow line and coarse steps; the pulse spectrum still sits well inside the line
COARSE = {
    "toggles.phonons": False,
    "ensemble.sigma": 3.0,
    "grids.steps_per_tau0": 50,
    "grids.window": 80.0,
    "pulse.tau_c": 40.0,
}


def _coarse(**extra):
    return override(SimConfig(), **{**COARSE, **extra})


def test_coupling_constant_example():
    medium = MediumParams()
    assert medium.eta == pytest.approx(54.28, rel=1e-3)
    assert medium.alpha == pytest.approx(8.97, abs=0.02)
    assert abs(medium.alpha / 10.0 - 1.0) < 0.15


def test_coupling_constant_is_linear_in_density():
    single = coupling_constant(5.0e20, 953.72, 0.0005)
    assert coupling_constant(1.0e21, 953.72, 0.0005) == pytest.approx(2.0 * single, rel=1e-14)
    assert coupling_constant(0.0, 953.72, 0.0005) == 0.0
    with pytest.raises(DomainError):
        coupling_constant(-1.0, 953.72, 0.0005)


def test_extinction_in_single_dot_limit():
    assert MediumParams(sigma=0.0).alpha == np.inf
    assert MediumParams(sigma=0.0, density=0.0).alpha == 0.0
    with pytest.raises(DomainError):
        MediumParams(polarization_factor=0.0)


def test_sech_envelope():
    assert abs(sech_envelope(2.0 * np.pi, 6.373, 0.0, np.array([0.0]))[0]) == pytest.approx(0.3138, abs=1e-4)
    tau = time_axis(240.0, 6.373 / 100)
    row = sech_envelope(2.0 * np.pi, 6.373, 120.0, tau)
    assert pulse_area(row, tau) == pytest.approx(2.0 * np.pi, rel=1e-6)
    assert np.all(np.isfinite(sech_envelope(1.0, 0.1, 0.0, np.array([-1.0e4, 1.0e4]))))
    with pytest.raises(DomainError):
        sech_envelope(1.0, 0.0, 0.0, tau)


def test_time_axis():
    axis = time_axis(120.0, 0.5)
    assert axis.size == 241
    assert axis[-1] == pytest.approx(120.0)


def test_field_grid_validation():
    tau = np.linspace(0.0, 1.0, 5)
    FieldGrid(zeta_axis=np.array([0.0]), tau_axis=tau, envelope=np.zeros((1, 5), dtype=complex))
    with pytest.raises(DomainError):
        FieldGrid(zeta_axis=np.array([0.0, 0.1, 0.3]), tau_axis=tau, envelope=np.zeros((3, 5), dtype=complex))
    with pytest.raises(DomainError):
        FieldGrid(zeta_axis=np.array([0.0, 0.1]), tau_axis=tau, envelope=np.zeros((2, 4), dtype=complex))
    bad = np.zeros((1, 5), dtype=complex)
    bad[0, 2] = np.nan
    with pytest.raises(NumericalError):
        FieldGrid(zeta_axis=np.array([0.0]), tau_axis=tau, envelope=bad)


def test_advance_slice_without_source():
    column = sech_envelope(np.pi, 6.373, 40.0, time_axis(80.0, 0.5))
    np.testing.assert_array_equal(advance_slice(column, 0.1, lambda c: np.zeros_like(c)), column)


def test_advance_slice_is_heun():
    kappa, h = 3.0, 0.05
    column = np.array([1.0 + 0j, 0.5j])
    out = advance_slice(column, h, lambda c: -kappa * c)
    np.testing.assert_allclose(out, column * (1.0 - kappa * h + 0.5 * (kappa * h) ** 2), rtol=1e-13)


def test_advance_slice_rejects_non_finite_source():
    column = np.ones(3, dtype=complex)
    with pytest.raises(NumericalError, match="zeta"):
        advance_slice(column, 0.1, lambda c: np.array([0.0, np.inf, 0.0]), tau_axis=np.arange(3.0))


def test_slice_count():
    medium = MediumParams()
    assert slice_count(MediumParams(length=0.0), 0.05) == 0
    assert slice_count(medium, 0.05) == math.ceil(medium.alpha / 0.05)
    assert slice_count(medium, 0.05, d_zeta=0.3) == 4
    assert slice_count(MediumParams(density=0.0), 0.05) == 1
    with pytest.raises(ConfigError):
        slice_count(MediumParams(sigma=0.0), 0.05)


def test_ensemble_medium_threads_and_zero_field():
    ensemble = build_uniform_ensemble(3.0, n_nodes=601)
    medium = EnsembleMedium(ensemble, RelaxationParams(), MediumParams(sigma=3.0), d_tau=0.2)
    np.testing.assert_array_equal(medium.source(np.zeros(101, dtype=complex)), 0.0)

    column = sech_envelope(np.pi, 3.0, 10.0, time_axis(20.0, 0.2))
    serial, _ = medium.respond(column)
    threaded = EnsembleMedium(ensemble, RelaxationParams(), MediumParams(sigma=3.0), d_tau=0.2, threads=3)
    parallel, _ = threaded.respond(column)
    np.testing.assert_array_equal(serial, parallel)


def test_zero_length_medium_returns_input():
    result = run_simulation(_coarse(**{"medium.length": 0.0}))
    assert result.grid.envelope.shape[0] == 1
    np.testing.assert_array_equal(result.grid.output, result.grid.envelope[0])
    assert result.input_area == pytest.approx(2.0 * np.pi, rel=0.005)
    assert result.validity["status"] == "ok"


def test_empty_medium_leaves_envelope_invariant():
    result = run_simulation(_coarse(**{"medium.density": 0.0, "medium.length": 0.5}))
    assert result.grid.zeta_axis.size == 2
    np.testing.assert_allclose(result.grid.output, result.grid.envelope[0], rtol=0.0, atol=1e-12)


def test_weak_pulse_follows_area_theorem():
    alpha = MediumParams.from_config(_coarse()).alpha
    length = 2.0 / alpha
    config = _coarse(**{"pulse.theta0": 0.1 * np.pi, "medium.length": length, "grids.alpha_dz": 0.2})
    result = run_simulation(config)
    expected = area_theorem_solution(result.input_area, alpha, length)
    assert result.output_area == pytest.approx(expected, rel=0.02)
    assert result.output_area < result.input_area


def test_thread_count_does_not_change_result():
    config = _coarse(**{"pulse.theta0": np.pi, "medium.length": 0.02, "grids.d_zeta": 0.01,
                        "output.slice_stride": 2})
    serial = run_simulation(config, threads=1)
    parallel = run_simulation(config, threads=2)
    np.testing.assert_array_equal(serial.grid.envelope, parallel.grid.envelope)
    assert serial.ensemble.size > 256
    assert serial.stored_coherence.shape == (2, serial.grid.tau_axis.size)
    np.testing.assert_array_equal(serial.stored_zeta, [0.0, 0.02])


def test_validity_bound_stops_strong_pulses():
    with pytest.raises(ValidityBoundError):
        run_simulation(override(SimConfig(), **{"pulse.theta0": 100.0}))


def test_phonon_run_reports_mean_displacement():
    config = override(SimConfig(), **{
        "toggles.single_qd": True,
        "medium.length": 0.0,
        "pulse.theta0": np.pi,
        "grids.steps_per_tau0": 20,
        "grids.table_omega": 11,
        "grids.table_delta": 21,
    })
    result = run_simulation(config)
    assert result.mean_B == pytest.approx(0.95, abs=0.005)
    assert result.ensemble.size == 1
    assert result.validity["status"] == "ok"


def test_default_grid_handles_far_detuned_classes():
    # the full default ensemble reaches |Δ|·dτ ≈ 5.8 in its outer classes
    config = override(SimConfig(), **{"toggles.phonons": False, "medium.length": 0.005, "grids.d_zeta": 0.005})
    result = run_simulation(config)
    assert np.abs(result.ensemble.nodes).max() * result.grid.d_tau > 5.0
    assert result.grid.zeta_axis.size == 2
    assert result.validity["status"] == "ok"
    assert result.output_area == pytest.approx(result.input_area, rel=1e-2)
