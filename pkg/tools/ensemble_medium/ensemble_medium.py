import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import roots_hermite

from tools.bloch_dynamics.bloch_dynamics import QdState
from tools.errors import ConfigError, ContractError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_GAUSS_HERMITE_NODES = 63
DEFAULT_SPAN_SIGMAS = 6.0


@dataclass(frozen=True)
class DetuningEnsemble:
    """
    Discretized inhomogeneous broadening: detuning classes with normalized weights
    """

    nodes: np.ndarray
    weights: np.ndarray
    sigma: float
    delta_c: float
    quadrature: str = "gauss_hermite"

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ContractError(f"{self.nodes.size} nodes but {self.weights.size} weights")
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > 1.0e-12:
            raise ContractError(f"Ensemble weights sum to {total!r}, not 1")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def profile_at_centre(self) -> float:
        """
        g(Δ_c), infinite in the single-dot limit
        """
        if self.sigma == 0:
            return np.inf
        return float(gaussian_profile(self.delta_c, self.sigma, self.delta_c))


def gaussian_profile(delta: ArrayLike, sigma: float, delta_c: float = 0.0) -> ArrayLike:
    """
    Inhomogeneous line shape g(Δ) = exp(−(Δ−Δ_c)²/2σ²)/(σ√2π)

    Args:
        delta: Detuning(s) in rad/ps
        sigma: Standard deviation in rad/ps (> 0)
        delta_c: Centre detuning in rad/ps

    Returns:
        g(Δ) in ps
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    delta = np.asarray(delta, dtype=float)
    value = np.exp(-((delta - delta_c) ** 2) / (2.0 * sigma ** 2)) / (sigma * np.sqrt(2.0 * np.pi))
    return value if value.ndim else float(value)


def build_ensemble(sigma: float, delta_c: float = 0.0, n_nodes: int = DEFAULT_GAUSS_HERMITE_NODES) -> DetuningEnsemble:
    """
    Gauss–Hermite discretization of the Gaussian detuning distribution

    Args:
        sigma: Standard deviation (rad/ps)
        delta_c: Centre detuning (rad/ps)
        n_nodes: Number of nodes (>= 3; odd keeps Δ_c a node)

    Returns:
        DetuningEnsemble with nodes Δ_c + √2σx_k and weights w_k/√π
    """
    if n_nodes < 3:
        raise ConfigError(f"needs at least 3 nodes, got {n_nodes}", key="ensemble.n_nodes")
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    x, w = roots_hermite(n_nodes)
    nodes = delta_c + np.sqrt(2.0) * sigma * x
    weights = w / np.sqrt(np.pi)
    weights = weights / np.sum(weights)
    if n_nodes % 2:
        # the Hermite root at the centre is zero only up to rounding
        nodes[n_nodes // 2] = delta_c
    return DetuningEnsemble(nodes=nodes, weights=weights, sigma=sigma, delta_c=delta_c, quadrature="gauss_hermite")


def uniform_node_count(sigma: float, window: float, span_sigmas: float = DEFAULT_SPAN_SIGMAS) -> int:
    """
    Odd node count whose spacing over Δ_c ± span·σ is at most 2π/window

    A spacing finer than 2π/window keeps the discrete ensemble from rephasing
    inside a time window of that length.
    """
    if not window > 0:
        raise DomainError(f"window must be > 0, got {window}")
    spacing = 2.0 * np.pi / window
    n_nodes = int(np.ceil(2.0 * span_sigmas * sigma / spacing)) + 1
    return n_nodes + 1 if n_nodes % 2 == 0 else n_nodes


def build_uniform_ensemble(sigma: float, delta_c: float = 0.0, n_nodes: Optional[int] = None,
                           window: Optional[float] = None,
                           span_sigmas: float = DEFAULT_SPAN_SIGMAS) -> DetuningEnsemble:
    """
    Trapezoid discretization of the Gaussian over Δ_c ± span·σ

    Args:
        sigma: Standard deviation (rad/ps)
        delta_c: Centre detuning (rad/ps)
        n_nodes: Number of nodes; derived from window when omitted
        window: Length of the time window the ensemble must stay dephased over (ps)
        span_sigmas: Half-width of the grid in units of σ

    Returns:
        DetuningEnsemble with trapezoid weights g(Δ_k)·h, normalized
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if n_nodes is None:
        if window is None:
            raise ConfigError("either n_nodes or the time window is required", key="ensemble.n_nodes")
        n_nodes = uniform_node_count(sigma, window, span_sigmas)
    if n_nodes < 3:
        raise ConfigError(f"needs at least 3 nodes, got {n_nodes}", key="ensemble.n_nodes")

    offsets = np.linspace(-span_sigmas * sigma, span_sigmas * sigma, n_nodes)
    nodes = delta_c + offsets
    weights = gaussian_profile(nodes, sigma, delta_c) * (offsets[1] - offsets[0])
    weights[[0, -1]] *= 0.5
    weights = weights / np.sum(weights)
    logger.debug("Uniform ensemble: %d nodes, spacing %.4g rad/ps", n_nodes, offsets[1] - offsets[0])
    return DetuningEnsemble(nodes=nodes, weights=weights, sigma=sigma, delta_c=delta_c, quadrature="uniform")


def single_dot(delta_c: float = 0.0) -> DetuningEnsemble:
    """
    The σ → 0 limit: one dot at Δ_c carrying all the weight
    """
    return DetuningEnsemble(nodes=np.array([float(delta_c)]), weights=np.array([1.0]), sigma=0.0,
                            delta_c=delta_c, quadrature="single")


def _check_sizes(values: np.ndarray, ensemble: DetuningEnsemble) -> np.ndarray:
    values = np.atleast_1d(values)
    if values.shape[-1] != ensemble.size:
        raise ContractError(f"Got {values.shape[-1]} per-node values for an ensemble of {ensemble.size} nodes")
    return values


def macroscopic_coherence(states: QdState, ensemble: DetuningEnsemble) -> complex:
    """
    Ensemble-averaged coherence Σ_k w_k·ρ12(Δ_k)

    Args:
        states: Batched state with one entry per node
        ensemble: The detuning discretization

    Returns:
        The weighted coherence
    """
    coherence = _check_sizes(np.asarray(states.rho12, dtype=complex), ensemble)
    return complex(np.dot(ensemble.weights, coherence))


def ensemble_population(states: QdState, ensemble: DetuningEnsemble) -> float:
    """
    Ensemble-averaged exciton population Σ_k w_k·ρ11(Δ_k)
    """
    population = _check_sizes(np.asarray(states.rho11, dtype=float), ensemble)
    return float(np.dot(ensemble.weights, population))
