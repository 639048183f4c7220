import logging
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.signal import find_peaks

from tools.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_PEAK_THRESHOLD = 0.05


@dataclass
class PulseMetrics:
    """
    Shape summary of one envelope row
    """

    area: float
    peak_value: float
    peak_time: float
    fwhm: float
    peak_count: int
    sub_pulse_areas: List[float] = field(default_factory=list)
    peak_times: List[float] = field(default_factory=list)


def pulse_area(envelope_row: np.ndarray, tau_axis: np.ndarray, signed: bool = False) -> float:
    """
    Pulse area ∫|Ω|dτ by the trapezoid rule

    Args:
        envelope_row: Complex envelope samples
        tau_axis: Time samples
        signed: Integrate Re Ω instead of |Ω|

    Returns:
        Area in rad
    """
    row = np.asarray(envelope_row)
    values = np.real(row) if signed else np.abs(row)
    return float(trapezoid(values, x=tau_axis))


def _check_pole(theta0: float) -> None:
    ratio = theta0 / np.pi
    if abs(ratio - round(ratio)) < 1.0e-12 and int(round(ratio)) % 2 == 1:
        raise DomainError(
            f"Area {theta0:.6g} rad is an odd multiple of pi, an unstable point of the area theorem"
        )


def area_theorem_solution(theta0: float, alpha: float, z: ArrayLike) -> ArrayLike:
    """
    Branch-continuous solution of tan(Θ/2) = tan(θ₀/2)·e^{−αz/2}

    The branch index n = round(θ₀/2π) keeps Θ in the basin of its stable 2nπ.

    Args:
        theta0: Input area in rad
        alpha: Extinction coefficient in mm⁻¹
        z: Propagation distance(s) in mm

    Returns:
        Θ(z) in rad
    """
    _check_pole(theta0)
    n = np.round(theta0 / (2.0 * np.pi))
    z = np.asarray(z, dtype=float)
    value = 2.0 * (n * np.pi + np.arctan(np.tan(theta0 / 2.0 - n * np.pi) * np.exp(-alpha * z / 2.0)))
    return value if value.ndim else float(value)


def area_theorem_ode(theta0: float, alpha: float, z: np.ndarray) -> np.ndarray:
    """
    Integrate dΘ/dz = −(α/2)·sin Θ numerically on the given z samples
    """
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return z
    solution = solve_ivp(lambda _, theta: -0.5 * alpha * np.sin(theta), (z[0], z[-1]), [theta0],
                         t_eval=z, rtol=1.0e-10, atol=1.0e-12, method="DOP853")
    return solution.y[0]


def extinction_coefficient(eta: float, g_at_center: float) -> float:
    """
    Optical extinction α = 2π·η·g(0)

    Args:
        eta: Coupling constant in mm⁻¹·rad/ps
        g_at_center: Line shape at the centre, in ps

    Returns:
        α in mm⁻¹
    """
    if eta < 0 or g_at_center < 0:
        raise DomainError(f"extinction_coefficient needs non-negative inputs, got {eta}, {g_at_center}")
    return 2.0 * np.pi * eta * g_at_center


def delay_estimate(alpha: float, length: float, tau0: float) -> float:
    """
    Soliton delay αLτ₀/4 in ps
    """
    if alpha < 0 or length < 0 or tau0 < 0:
        raise DomainError(f"delay_estimate needs non-negative inputs, got {alpha}, {length}, {tau0}")
    return alpha * length * tau0 / 4.0


def sit_area_estimate(tau0: float, t2_prime: float) -> float:
    """
    Transmitted area 2π(1 − τ₀/T₂′) of a 2π pulse under slow dephasing
    """
    if not t2_prime > 0:
        raise DomainError(f"t2_prime must be > 0, got {t2_prime}")
    return 2.0 * np.pi * (1.0 - tau0 / t2_prime)


def _refined_peak_time(magnitude: np.ndarray, tau_axis: np.ndarray, index: int) -> float:
    # parabola through the peak sample and its neighbours
    if index == 0 or index == magnitude.size - 1:
        return float(tau_axis[index])
    left, centre, right = magnitude[index - 1:index + 2]
    curvature = left - 2.0 * centre + right
    if curvature == 0:
        return float(tau_axis[index])
    offset = 0.5 * (left - right) / curvature
    return float(tau_axis[index] + offset * (tau_axis[1] - tau_axis[0]))


def measure_delay(input_row: np.ndarray, output_row: np.ndarray, tau_axis: np.ndarray) -> float:
    """
    Shift of the envelope maximum between two rows, in ps
    """
    peak_in = _refined_peak_time(np.abs(input_row), tau_axis, int(np.argmax(np.abs(input_row))))
    peak_out = _refined_peak_time(np.abs(output_row), tau_axis, int(np.argmax(np.abs(output_row))))
    return peak_out - peak_in


def pulse_fwhm(envelope_row: np.ndarray, tau_axis: np.ndarray) -> float:
    """
    Full width at half maximum of |Ω| around its global peak (linear crossing interpolation)
    """
    magnitude = np.abs(np.asarray(envelope_row))
    peak = int(np.argmax(magnitude))
    half = 0.5 * magnitude[peak]
    if half == 0:
        return 0.0

    left = peak
    while left > 0 and magnitude[left - 1] >= half:
        left -= 1
    right = peak
    while right < magnitude.size - 1 and magnitude[right + 1] >= half:
        right += 1

    t_left = tau_axis[left]
    if left > 0:
        a, b = magnitude[left - 1], magnitude[left]
        t_left = tau_axis[left - 1] + (half - a) / (b - a) * (tau_axis[left] - tau_axis[left - 1])
    t_right = tau_axis[right]
    if right < magnitude.size - 1:
        a, b = magnitude[right], magnitude[right + 1]
        t_right = tau_axis[right] + (a - half) / (a - b) * (tau_axis[right + 1] - tau_axis[right])
    return float(t_right - t_left)


def detect_peaks(envelope_row: np.ndarray, tau_axis: np.ndarray,
                 threshold_fraction: float = DEFAULT_PEAK_THRESHOLD) -> PulseMetrics:
    """
    Find the sub-pulses of an envelope row

    Args:
        envelope_row: Complex envelope samples
        tau_axis: Time samples
        threshold_fraction: Peaks below this fraction of the global maximum are ignored

    Returns:
        PulseMetrics with one sub-pulse area per peak, split at the minima between peaks
    """
    if not 0 < threshold_fraction < 1:
        raise DomainError(f"threshold_fraction must lie in (0, 1), got {threshold_fraction}")
    magnitude = np.abs(np.asarray(envelope_row))
    area = pulse_area(envelope_row, tau_axis)
    global_index = int(np.argmax(magnitude))
    global_peak = float(magnitude[global_index])
    if global_peak == 0:
        return PulseMetrics(area=area, peak_value=0.0, peak_time=float(tau_axis[global_index]), fwhm=0.0,
                            peak_count=0)

    peaks, _ = find_peaks(magnitude, height=threshold_fraction * global_peak)
    if peaks.size == 0:
        # monotone rows peak on the window edge
        peaks = np.array([global_index])

    boundaries = [0]
    for a, b in zip(peaks[:-1], peaks[1:]):
        boundaries.append(int(a + np.argmin(magnitude[a:b + 1])))
    boundaries.append(magnitude.size - 1)
    sub_areas = [float(trapezoid(magnitude[lo:hi + 1], x=tau_axis[lo:hi + 1]))
                 for lo, hi in zip(boundaries[:-1], boundaries[1:])]

    return PulseMetrics(
        area=area,
        peak_value=global_peak,
        peak_time=_refined_peak_time(magnitude, tau_axis, global_index),
        fwhm=pulse_fwhm(envelope_row, tau_axis),
        peak_count=int(peaks.size),
        sub_pulse_areas=sub_areas,
        peak_times=[float(tau_axis[p]) for p in peaks],
    )
