"""Vector arithmetic, replayable random streams, and oracle interfaces.

Everything downstream (problem construction, local solvers, federated
methods, the experiment harness) is written against the primitives in this
module: dense float64 vectors, counter-based random streams addressed by
``(master_seed, path)``, and client oracles exposing value/gradient pairs
for one client's local objective.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Vector = np.ndarray


class DimensionError(ValueError):
    """Operands with incompatible shapes were combined."""


class NonFiniteError(ValueError):
    """A NaN or Inf crossed an oracle boundary."""


class ConfigurationError(ValueError):
    """A configuration value is outside its documented domain."""


def as_vector(x) -> Vector:
    """Coerce ``x`` to a 1-D float64 array (copying only when needed)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def require_finite(arr, what: str = "value"):
    """Raise :class:`NonFiniteError` unless every entry of ``arr`` is finite."""
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite entries in {what}")
    return arr


def axpy_combine(coeffs: Sequence[float], vectors: Sequence[Vector]) -> Vector:
    """Return ``sum_j coeffs[j] * vectors[j]`` as a new vector.

    All vectors must share one dimension and there must be one coefficient
    per vector; mismatches raise :class:`DimensionError`.
    """
    if len(coeffs) != len(vectors):
        raise DimensionError(
            f"{len(coeffs)} coefficients for {len(vectors)} vectors"
        )
    if not vectors:
        raise DimensionError("empty linear combination")
    dims = {v.shape for v in vectors}
    if len(dims) != 1:
        raise DimensionError(f"mixed vector shapes {sorted(dims)}")
    stack = np.stack([as_vector(v) for v in vectors])
    return np.asarray(coeffs, dtype=np.float64) @ stack


@dataclass(frozen=True)
class RandomStream:
    """Deterministic random stream addressed by a seed and an integer path.

    A stream never holds generator state: :meth:`generator` rebuilds the
    underlying PRNG from ``(master_seed, path)`` on every call, so replaying
    a path reproduces bit-identical draws no matter how many other streams
    were consumed in between.  Child streams obtained through :meth:`fork`
    are statistically independent of the parent and of each other.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.master_seed < 0:
            raise ConfigurationError("master_seed must be non-negative")
        if any(label < 0 for label in self.path):
            raise ConfigurationError("stream path labels must be non-negative")

    def fork(self, label: int) -> "RandomStream":
        """Child stream for integer ``label`` (deterministic, collision-free)."""
        if label < 0:
            raise ConfigurationError("stream path labels must be non-negative")
        return RandomStream(self.master_seed, self.path + (label,))

    def descend(self, labels: Sequence[int]) -> "RandomStream":
        """Fork repeatedly: ``descend([a, b])`` equals ``fork(a).fork(b)``."""
        stream = self
        for label in labels:
            stream = stream.fork(label)
        return stream

    def generator(self) -> np.random.Generator:
        """Fresh generator seeded from this stream's address."""
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=self.path
        )
        return np.random.default_rng(seq)


class ClientOracle(ABC):
    """First-order oracle for one client's local objective.

    Subclasses implement ``_value`` and ``_gradient``; the public methods
    validate shapes and reject non-finite inputs and outputs, so a NaN is
    caught at the oracle boundary instead of propagating silently.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    smoothness_hint : float or None
        Upper bound on the gradient Lipschitz constant, if known.
    convexity_hint : float or None
        Strong-convexity modulus (0 for merely convex), or None when the
        objective is not known to be convex.
    """

    dim: int
    smoothness_hint: float | None = None
    convexity_hint: float | None = None

    @abstractmethod
    def _value(self, x: Vector) -> float: ...

    @abstractmethod
    def _gradient(self, x: Vector) -> Vector: ...

    def _check_input(self, x) -> Vector:
        v = as_vector(x)
        if v.shape[0] != self.dim:
            raise DimensionError(
                f"oracle dimension {self.dim}, query dimension {v.shape[0]}"
            )
        require_finite(v, "oracle query point")
        return v

    def value(self, x) -> float:
        v = float(self._value(self._check_input(x)))
        if not np.isfinite(v):
            raise NonFiniteError("non-finite objective value")
        return v

    def gradient(self, x) -> Vector:
        g = as_vector(self._gradient(self._check_input(x)))
        require_finite(g, "gradient")
        return g

    def stochastic_gradient(self, x, stream: RandomStream) -> Vector:
        """Unbiased gradient estimate.

        The base implementation is the deterministic gradient (zero
        variance); subclasses with sampling schemes override it.
        """
        return self.gradient(x)

    def stochastic_gradient_std(self, x) -> Vector | None:
        """Per-coordinate standard deviation of :meth:`stochastic_gradient`.

        None when the estimator is deterministic.
        """
        return None

    @property
    def stochastic_cost(self) -> float:
        """Cost of one stochastic gradient in full-gradient units."""
        return 1.0


@dataclass
class DistributedProblem:
    """A finite-sum objective ``f = (1/n) sum_i f_i`` over client oracles.

    Parameters below the client list are optional annotations: smoothness
    of the worst client (`l_smooth`), smoothness of the global average
    (`l_smooth_global`, never larger), a strong-convexity modulus, exact
    quadratic structure when available, and a known minimizer.
    """

    clients: list[ClientOracle]
    dim: int
    l_smooth: float | None = None
    l_smooth_global: float | None = None
    mu: float | None = None
    quadratic: object | None = None
    x_star: Vector | None = None
    f_star: float | None = None

    def __post_init__(self):
        if not self.clients:
            raise ConfigurationError("a problem needs at least one client")
        for c in self.clients:
            if c.dim != self.dim:
                raise DimensionError("client dimension mismatch")

    @property
    def n(self) -> int:
        return len(self.clients)

    def f(self, x) -> float:
        return sum(c.value(x) for c in self.clients) / self.n

    def grad_f(self, x) -> Vector:
        return self.mean_gradient(self.client_gradients(x))

    def client_gradients(self, x) -> list[Vector]:
        return [c.gradient(x) for c in self.clients]

    @staticmethod
    def mean_gradient(grads: Sequence[Vector]) -> Vector:
        # single canonical reduction so every caller gets bitwise-equal means
        return np.mean(np.stack(grads), axis=0)


def finite_difference_gradient(
    fn: Callable[[Vector], float], x: Vector, rel_step: float = 1e-6
) -> Vector:
    """Central finite-difference gradient with step ``rel_step*(1+||x||)``."""
    x = as_vector(x)
    h = rel_step * (1.0 + float(np.linalg.norm(x)))
    g = np.empty_like(x)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g
