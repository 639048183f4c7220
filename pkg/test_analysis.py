import numpy as np
import pytest

from tools.analysis.analysis import (
    area_theorem_ode,
    area_theorem_solution,
    delay_estimate,
    detect_peaks,
    extinction_coefficient,
    measure_delay,
    pulse_area,
    pulse_fwhm,
    sit_area_estimate,
)
from tools.analysis.scans import coherence_spectrum_scan, population_vs_area_scan
from tools.cli_io.config import SimConfig, override
from tools.errors import DomainError
from tools.propagation.propagation import sech_envelope, time_axis

TAU0 = 6.373

# Phonons off, no relaxation, pulse centred in a long window
RABI = {
    "toggles.phonons": False,
    "relax.gamma": 0.0,
    "relax.gamma_d": 0.0,
    "grids.window": 120.0,
    "pulse.tau_c": 60.0,
}


def test_pulse_area():
    tau = np.linspace(0.0, 2.0, 21)
    assert pulse_area(np.ones(21), tau) == pytest.approx(2.0)
    assert pulse_area(1j * np.ones(21), tau) == pytest.approx(2.0)
    assert pulse_area(1j * np.ones(21), tau, signed=True) == 0.0


def test_area_theorem_examples():
    assert area_theorem_solution(2.0 * np.pi, 10.0, 1.0) == pytest.approx(2.0 * np.pi, rel=1e-12)
    assert area_theorem_solution(np.pi / 2.0, 1.0, 2.0 * np.log(2.0)) == pytest.approx(0.9273, abs=1e-4)
    assert area_theorem_solution(0.1 * np.pi, 1.0, 10.0) == pytest.approx(0.002135, abs=1e-6)
    # small-angle limit θ₀·e^{−αz/2}
    assert area_theorem_solution(0.1 * np.pi, 1.0, 10.0) == pytest.approx(0.1 * np.pi * np.exp(-5.0), rel=0.01)


def test_area_theorem_branches():
    assert area_theorem_solution(1.5 * np.pi, 1.0, 40.0) == pytest.approx(2.0 * np.pi, abs=1e-6)
    assert area_theorem_solution(0.9 * np.pi, 1.0, 40.0) == pytest.approx(0.0, abs=1e-6)
    assert area_theorem_solution(4.2 * np.pi, 1.0, 40.0) == pytest.approx(4.0 * np.pi, abs=1e-6)
    values = area_theorem_solution(2.5 * np.pi, 1.0, np.linspace(0.0, 10.0, 11))
    assert np.all(np.diff(values) < 0)


@pytest.mark.parametrize("theta0", [np.pi, 3.0 * np.pi, -np.pi])
def test_area_theorem_rejects_unstable_points(theta0):
    with pytest.raises(DomainError):
        area_theorem_solution(theta0, 1.0, 1.0)


@pytest.mark.parametrize("theta0", [0.3, 0.9 * np.pi, 1.2 * np.pi, 2.8 * np.pi])
def test_area_theorem_ode_agrees(theta0):
    z = np.linspace(0.0, 3.0, 7)
    np.testing.assert_allclose(area_theorem_ode(theta0, 2.0, z), area_theorem_solution(theta0, 2.0, z), rtol=1e-7)


def test_extinction_and_delay_examples():
    assert extinction_coefficient(54.28, 0.02660) == pytest.approx(2.0 * np.pi * 54.28 * 0.02660)
    with pytest.raises(DomainError):
        extinction_coefficient(-1.0, 0.02660)
    assert delay_estimate(10.0, 1.0, TAU0) == pytest.approx(15.93, abs=0.01)
    assert delay_estimate(10.0, 0.5, TAU0) == pytest.approx(7.97, abs=0.01)
    assert delay_estimate(0.0, 1.0, TAU0) == 0.0


def test_sit_area_estimate():
    assert sit_area_estimate(TAU0, 2000.0) == pytest.approx(2.0 * np.pi * (1.0 - TAU0 / 2000.0))
    assert sit_area_estimate(TAU0, np.inf) == pytest.approx(2.0 * np.pi)
    with pytest.raises(DomainError):
        sit_area_estimate(TAU0, 0.0)


def test_detect_single_peak():
    tau = time_axis(120.0, 0.05)
    row = sech_envelope(2.0 * np.pi, TAU0, 40.0, tau)
    metrics = detect_peaks(row, tau)
    assert metrics.peak_count == 1
    assert metrics.peak_time == pytest.approx(40.0, abs=1e-3)
    assert metrics.sub_pulse_areas[0] == pytest.approx(metrics.area)


def test_detect_pulse_break_up():
    # far enough apart that the split at the minimum leaves < 1e-4 of either area behind
    tau = time_axis(200.0, 0.05)
    row = sech_envelope(2.0 * np.pi, TAU0 / 2.0, 40.0, tau) + sech_envelope(2.0 * np.pi, TAU0, 140.0, tau)
    metrics = detect_peaks(row, tau)
    assert metrics.peak_count == 2
    assert metrics.peak_times == pytest.approx([40.0, 140.0], abs=0.05)
    assert metrics.sub_pulse_areas == pytest.approx([2.0 * np.pi, 2.0 * np.pi], rel=1e-3)
    assert sum(metrics.sub_pulse_areas) == pytest.approx(metrics.area, rel=1e-12)

    scaled = detect_peaks(3.0 * row, tau)
    assert scaled.peak_count == metrics.peak_count
    assert scaled.peak_times == metrics.peak_times


def test_detect_peaks_edge_cases():
    tau = time_axis(10.0, 0.1)
    assert detect_peaks(np.zeros(tau.size), tau).peak_count == 0
    with pytest.raises(DomainError):
        detect_peaks(np.ones(tau.size), tau, threshold_fraction=1.0)


def test_measure_delay_and_width():
    tau = time_axis(120.0, 0.01)
    before = sech_envelope(2.0 * np.pi, TAU0, 40.0, tau)
    after = sech_envelope(2.0 * np.pi, TAU0, 45.32, tau)
    assert measure_delay(before, after, tau) == pytest.approx(5.32, abs=5e-3)
    assert pulse_fwhm(before, tau) == pytest.approx(2.0 * np.arccosh(2.0) * TAU0, rel=1e-3)
    assert pulse_fwhm(np.zeros(tau.size), tau) == 0.0


def test_population_scan_single_dot():
    config = override(SimConfig(), **RABI)
    scan = population_vs_area_scan([0.0, np.pi, 2.0 * np.pi, 3.0 * np.pi], 119.0, config)
    np.testing.assert_allclose(scan["rho11"], [0.0, 1.0, 0.0, 1.0], atol=1e-3)
    np.testing.assert_array_equal(scan["area"], [0.0, np.pi, 2.0 * np.pi, 3.0 * np.pi])


def test_population_scan_ensemble_average():
    config = override(SimConfig(), **{**RABI, "ensemble.sigma": 3.0})
    single = population_vs_area_scan([np.pi], 119.0, config)
    averaged = population_vs_area_scan([np.pi], 119.0, config, ensemble_average=True)
    assert 0.0 < averaged["rho11"][0] < 0.5 * single["rho11"][0]


def test_coherence_spectrum_scan():
    config = override(SimConfig(), **{**RABI, "ensemble.quadrature": "gauss_hermite", "ensemble.n_nodes": 15})
    scan = coherence_spectrum_scan([5.0, 119.0], config)
    assert scan["rho12"].shape == (2, 15)
    assert scan["delta"].size == 15
    np.testing.assert_allclose(scan["time"], [5.0, 119.0], atol=TAU0 / 100)
    assert np.max(np.abs(scan["rho12"][0])) < 1e-3
    # the resonant class completes a full Rabi cycle
    assert abs(scan["rho12"][1, 7]) < 1e-3
    with pytest.raises(DomainError):
        coherence_spectrum_scan([500.0], config)
