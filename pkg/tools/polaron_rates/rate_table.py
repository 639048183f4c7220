import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from tqdm import tqdm

from tools.errors import DomainError, NumericalError, SimulatorError, TableRangeError
from tools.phonon_bath.phonon_bath import CorrelationTable, phonon_hash
from tools.polaron_rates.polaron_rates import (
    KERNEL_NAMES,
    PhononRates,
    RateKernels,
    assemble_rate_arrays,
    compute_kernel_grid,
)

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"SITRATE1"
DEFAULT_RESOLUTION = (201, 201)
# The Δ axis is near-uniform inside ±DELTA_CORE_SCALE·ω_b and sinh-stretched beyond
DELTA_CORE_SCALE = 2.0
# rounding slack on the axis bounds before a lookup counts as out of range
AXIS_SLACK = 1.0e-12
# negative Γ^{σ±} below this fraction of the largest rate is Simpson noise in the far tails
NEGATIVE_RATE_TOLERANCE = 1.0e-3


@dataclass(frozen=True)
class RateTable:
    """
    Rate kernels tabulated on an (Ω_R, Δ) grid.

    kernels has shape (7, n_omega, n_delta), planes ordered as KERNEL_NAMES.
    Lookups are cubic along Δ and linear along Ω_R.
    The table is immutable once built and safe to share between threads.
    """

    omega_axis: np.ndarray
    delta_axis: np.ndarray
    kernels: np.ndarray
    mean_B: float
    key: str = ""
    delta_spline: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for array in (self.omega_axis, self.delta_axis, self.kernels):
            array.setflags(write=False)
        if self.delta_axis.size >= 3:
            object.__setattr__(self, "delta_spline", CubicSpline(self.delta_axis, self.kernels, axis=2))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.omega_axis.size, self.delta_axis.size

    def along_delta(self, deltas: np.ndarray) -> np.ndarray:
        """
        Kernels interpolated to the given detunings, shape (7, n_omega, n)

        Raises:
            TableRangeError: a detuning lies outside the table
        """
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        j, t = _bracket(self.delta_axis, deltas, "delta")
        if self.delta_spline is None:
            return (1.0 - t) * self.kernels[:, :, j] + t * self.kernels[:, :, j + 1]
        return self.delta_spline(np.clip(deltas, self.delta_axis[0], self.delta_axis[-1]))

    def bind(self, deltas: np.ndarray) -> "BoundRates":
        """
        Interpolate the table along Δ once for a fixed set of detuning classes
        """
        return BoundRates(self, deltas)


def _bracket(axis: np.ndarray, values: np.ndarray, name: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cell index and fractional position of each value on a non-uniform ascending axis
    """
    values = np.asarray(values, dtype=float)
    low, high = axis[0], axis[-1]
    slack = AXIS_SLACK * max(1.0, abs(low), abs(high))
    outside = (values < low - slack) | (values > high + slack) | ~np.isfinite(values)
    if np.any(outside):
        bad = values[outside].flat[0]
        raise TableRangeError(name, float(bad), float(low), float(high))
    clipped = np.clip(values, low, high)
    index = np.clip(np.searchsorted(axis, clipped, side="right") - 1, 0, axis.size - 2)
    weight = (clipped - axis[index]) / (axis[index + 1] - axis[index])
    return index, weight


def table_hash(corr: CorrelationTable, field_max: float, delta_span: float, resolution: Tuple[int, int],
               delta_center: float = 0.0, delta_stretch: float = 0.0) -> str:
    """
    Cache key of a rate table: bath parameters, φ-grid and table grid spec
    """
    payload = {
        "bath": phonon_hash(corr.params),
        "tau_step": corr.tau_step,
        "tau_max": float(corr.tau_grid[-1]),
        "field_max": field_max,
        "delta_span": delta_span,
        "delta_center": delta_center,
        "delta_stretch": delta_stretch,
        "resolution": list(resolution),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def default_delta_stretch(delta_span: float, omega_b: float) -> float:
    """
    sinh stretch that keeps the axis near-uniform over |Δ| ≲ DELTA_CORE_SCALE·ω_b
    """
    return float(np.arcsinh(delta_span / (DELTA_CORE_SCALE * omega_b)))


def delta_axis(delta_span: float, n_delta: int, delta_center: float = 0.0,
               delta_stretch: float = 0.0) -> np.ndarray:
    """
    Detuning axis over delta_center ± delta_span, denser near the centre when stretched
    """
    u = np.linspace(-1.0, 1.0, n_delta)
    if delta_stretch > 0:
        u = np.sinh(delta_stretch * u) / np.sinh(delta_stretch)
    return delta_center + delta_span * u


def build_rate_table(field_max: float, delta_span: float, corr: CorrelationTable,
                     resolution: Tuple[int, int] = DEFAULT_RESOLUTION, delta_center: float = 0.0,
                     delta_stretch: Optional[float] = None, threads: int = 1,
                     progress: bool = False) -> RateTable:
    """
    Tabulate the rate kernels on [0, field_max] × [delta_center ± delta_span]

    Args:
        field_max: Largest polaron-shifted Rabi frequency Ω_R to cover
        delta_span: Half-width of the detuning range
        corr: Cached phonon correlation function
        resolution: Number of nodes on the (Ω_R, Δ) axes, each >= 2
        delta_center: Centre of the detuning range
        delta_stretch: sinh stretch of the Δ axis (0 for a uniform axis, None for
            default_delta_stretch at the bath cutoff)
        threads: Worker threads filling independent Ω_R rows
        progress: Show a progress bar

    Returns:
        Immutable RateTable
    """
    n_omega, n_delta = resolution
    if not field_max > 0:
        raise DomainError(f"field_max must be > 0, got {field_max}")
    if not delta_span > 0:
        raise DomainError(f"delta_span must be > 0, got {delta_span}")
    if n_omega < 2 or n_delta < 2:
        raise DomainError(f"Rate table resolution must be >= 2 per axis, got {resolution}")

    if delta_stretch is None:
        delta_stretch = default_delta_stretch(delta_span, corr.params.omega_b)
    omega_axis = np.linspace(0.0, field_max, n_omega)
    deltas = delta_axis(delta_span, n_delta, delta_center, delta_stretch)
    kernels = np.empty((len(KERNEL_NAMES), n_omega, n_delta))

    def fill_row(i: int) -> int:
        kernels[:, i, :] = compute_kernel_grid(np.full(n_delta, omega_axis[i]), deltas, corr)
        return i

    logger.info("Building rate table %dx%d over Omega_R <= %.4f rad/ps, |Delta - %.3f| <= %.4f rad/ps",
                n_omega, n_delta, field_max, delta_center, delta_span)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        rows = executor.map(fill_row, range(n_omega))
        for _ in tqdm(rows, total=n_omega, desc="Rate table", disable=not progress):
            pass

    if not np.all(np.isfinite(kernels)):
        raise NumericalError("Rate table contains non-finite kernels")

    key = table_hash(corr, field_max, delta_span, resolution, delta_center, delta_stretch)
    table = RateTable(omega_axis=omega_axis, delta_axis=deltas, kernels=kernels, mean_B=corr.mean_B, key=key)
    _check_positive_rates(table)
    return table


def _check_positive_rates(table: RateTable) -> None:
    """
    Γ^{σ±} must be non-negative on every node of a real-field table
    """
    omega_B = np.repeat(table.omega_axis, table.delta_axis.size).astype(complex)
    flat = table.kernels.reshape(len(KERNEL_NAMES), -1)
    gamma_plus, gamma_minus = assemble_rate_arrays(omega_B, flat)[:2]
    scale = max(np.max(np.abs(gamma_plus)), np.max(np.abs(gamma_minus)), 1.0e-300)
    worst = min(gamma_plus.min(), gamma_minus.min())
    if worst < -NEGATIVE_RATE_TOLERANCE * scale:
        raise NumericalError(f"Rate table produced a negative scattering rate ({worst:.3e} rad/ps)")
    if worst < 0:
        logger.debug("Smallest tabulated scattering rate %.3e rad/ps is quadrature noise", worst)


def lookup_kernels(table: RateTable, omega_R: float, delta: float) -> RateKernels:
    """
    Interpolate every kernel at one (Ω_R, Δ): cubic in Δ, linear in Ω_R

    Raises:
        TableRangeError: the point lies outside the table, naming the axis
    """
    i, s = _bracket(table.omega_axis, np.array([omega_R]), "omega_R")
    i, s = int(i[0]), float(s[0])
    column = table.along_delta(np.array([delta]))[:, :, 0]
    values = (1.0 - s) * column[:, i] + s * column[:, i + 1]
    return RateKernels.from_array(omega_R, delta, values)


def lookup_rates(table: RateTable, omega_complex: complex, delta: float, mean_B: float) -> PhononRates:
    """
    Phonon rates at (Ω, Δ) from the interpolated kernels

    Args:
        table: Rate table
        omega_complex: Bare complex Rabi frequency
        delta: Detuning
        mean_B: ⟨B⟩

    Returns:
        PhononRates with scalar fields
    """
    omega_B = mean_B * omega_complex
    kernels = lookup_kernels(table, abs(omega_B), delta)
    return PhononRates(*(float(r) for r in assemble_rate_arrays(omega_B, kernels.as_array())))


class BoundRates:
    """
    A rate table pre-interpolated along Δ for a fixed set of detuning classes.

    Each lookup then blends two Ω_R rows per class, which keeps the per-stage
    cost of the propagation loop linear in the number of classes.
    """

    def __init__(self, table: RateTable, deltas: np.ndarray):
        self.table = table
        self.deltas = np.asarray(deltas, dtype=float)
        # shape (7, n_omega, n_nodes)
        self.kernels = table.along_delta(self.deltas)
        self._columns = np.arange(self.deltas.size)

    def kernel_arrays(self, omega_R: np.ndarray) -> np.ndarray:
        """
        Kernels of shape (7, n_nodes) at one Ω_R per node
        """
        i, s = _bracket(self.table.omega_axis, omega_R, "omega_R")
        lower = self.kernels[:, i, self._columns]
        upper = self.kernels[:, i + 1, self._columns]
        return (1.0 - s) * lower + s * upper

    def rates(self, omega_B: np.ndarray) -> PhononRates:
        """
        Rates of every node for the polaron-dressed field ⟨B⟩Ω seen by each node

        Args:
            omega_B: ⟨B⟩Ω, complex scalar or shape (n_nodes,)
        """
        omega_B = np.broadcast_to(np.asarray(omega_B, dtype=complex), self.deltas.shape)
        kernels = self.kernel_arrays(np.abs(omega_B))
        return PhononRates(*assemble_rate_arrays(omega_B, kernels))


def save_rate_table(table: RateTable, path: str) -> None:
    """
    Write a rate table as magic, JSON header, then little-endian 64-bit floats

    The payload is the Ω_R axis, the Δ axis and the kernel planes, each row-major.
    """
    header = {
        "key": table.key,
        "mean_B": table.mean_B,
        "n_omega": int(table.omega_axis.size),
        "n_delta": int(table.delta_axis.size),
        "kernels": list(KERNEL_NAMES),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(len(header_bytes).to_bytes(4, "little"))
        f.write(header_bytes)
        for array in (table.omega_axis, table.delta_axis, table.kernels):
            f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    logger.info("Saved rate table to %s", path)


def load_rate_table(path: str, expected_key: Optional[str] = None) -> Optional[RateTable]:
    """
    Read a cached rate table

    Args:
        path: Cache file
        expected_key: If given, a table with another key is treated as a miss

    Returns:
        The RateTable, or None on a missing, stale or unreadable cache
    """
    if not os.path.exists(path):
        return None
    try:
        with open(path, "rb") as f:
            if f.read(len(CACHE_MAGIC)) != CACHE_MAGIC:
                raise SimulatorError("bad magic")
            header_length = int.from_bytes(f.read(4), "little")
            header = json.loads(f.read(header_length).decode())
            payload = np.frombuffer(f.read(), dtype="<f8")
    except (OSError, ValueError, SimulatorError) as e:
        logger.warning("Ignoring unreadable rate table cache %s: %s", path, e)
        return None

    if expected_key is not None and header.get("key") != expected_key:
        logger.info("Rate table cache %s is stale", path)
        return None

    n_omega, n_delta = header["n_omega"], header["n_delta"]
    n_kernels = len(header["kernels"])
    expected = n_omega + n_delta + n_kernels * n_omega * n_delta
    if payload.size != expected or header["kernels"] != list(KERNEL_NAMES):
        logger.warning("Ignoring rate table cache %s with unexpected layout", path)
        return None

    omega_axis = payload[:n_omega].astype(float)
    deltas = payload[n_omega:n_omega + n_delta].astype(float)
    kernels = payload[n_omega + n_delta:].astype(float).reshape(n_kernels, n_omega, n_delta)
    logger.info("Loaded rate table from %s", path)
    return RateTable(omega_axis=omega_axis, delta_axis=deltas, kernels=kernels,
                     mean_B=header["mean_B"], key=header["key"])
