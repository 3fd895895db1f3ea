"""Synthetic quadratic families with a controllable Hessian spread.

Each client objective is

    f_i(x) = (1/m) sum_j 0.5 (x - b_ij)' A_ij (x - b_ij)
             + beta * sum_k x_k^2 / (1 + x_k^2),

where the optional second term is a bounded, coordinate-separable sigmoid
penalty (identical across clients, so it never contributes to inter-client
Hessian dissimilarity; it adds at most ``2*beta`` to smoothness and can
subtract ``beta/2`` from the curvature lower bound).

Generated families share one orthogonal eigenbasis for every ``A_ij``, so
operator norms of client-mean deviations, and hence the dissimilarity
constants, are available in closed form.  Explicit dense symmetric
matrices are also supported for hand-built fixtures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    ClientOracle,
    ConfigurationError,
    DimensionError,
    DistributedProblem,
    RandomStream,
    Vector,
    as_vector,
)

# Eigenvalue floor used when a merely-convex family (min_eig ~ 0) is drawn;
# keeps the minimizer finite while staying far below every other eigenvalue.
GENERAL_CONVEX_FLOOR = 1e-6
_SYMMETRY_TOL = 1e-10


def _sigmoid_value(x: Vector, beta: float) -> float:
    if beta == 0.0:
        return 0.0
    sq = x * x
    return beta * float(np.sum(sq / (1.0 + sq)))


def _sigmoid_gradient(x: Vector, beta: float) -> Vector:
    if beta == 0.0:
        return np.zeros_like(x)
    denom = 1.0 + x * x
    return beta * 2.0 * x / (denom * denom)


@dataclass
class QuadraticClientSpec:
    """One client's component matrices and centers.

    Exactly one of ``spectra`` (eigenvalues in the family basis, shape
    ``(m, d)``) and ``matrices`` (dense symmetric, shape ``(m, d, d)``) is
    set.  ``centers`` holds the ``b_ij`` in original coordinates.
    """

    centers: np.ndarray
    beta: float = 0.0
    spectra: np.ndarray | None = None
    matrices: np.ndarray | None = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2:
            raise DimensionError("centers must have shape (m, d)")
        if (self.spectra is None) == (self.matrices is None):
            raise ConfigurationError(
                "exactly one of spectra/matrices must be given"
            )
        m, d = self.centers.shape
        if self.spectra is not None:
            self.spectra = np.asarray(self.spectra, dtype=np.float64)
            if self.spectra.shape != (m, d):
                raise DimensionError("spectra must have shape (m, d)")
        else:
            self.matrices = np.asarray(self.matrices, dtype=np.float64)
            if self.matrices.shape != (m, d, d):
                raise DimensionError("matrices must have shape (m, d, d)")
            scale = 1.0 + np.max(np.abs(self.matrices))
            skew = np.max(
                np.abs(self.matrices - np.transpose(self.matrices, (0, 2, 1)))
            )
            if skew > _SYMMETRY_TOL * scale:
                raise ConfigurationError("component matrices must be symmetric")
        if self.beta < 0.0:
            raise ConfigurationError("beta must be non-negative")

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def mean_spectrum(self) -> np.ndarray | None:
        return None if self.spectra is None else self.spectra.mean(axis=0)

    def mean_hessian(self) -> np.ndarray:
        """Dense client-mean quadratic Hessian (sigmoid term excluded)."""
        if self.matrices is not None:
            return self.matrices.mean(axis=0)
        return np.diag(self.mean_spectrum())


@dataclass
class QuadraticFamily:
    """All clients of one quadratic instance plus the shared basis.

    ``basis`` is the orthogonal matrix Q such that every component matrix
    is ``Q diag(s) Q'`` (None means the standard axes, which also covers
    dense specs).  All specs must use the same representation.
    """

    specs: list[QuadraticClientSpec]
    basis: np.ndarray | None = None

    def __post_init__(self):
        if not self.specs:
            raise ConfigurationError("family needs at least one client")
        kinds = {spec.spectra is not None for spec in self.specs}
        if len(kinds) != 1:
            raise ConfigurationError("mixed spectral/dense client specs")
        self.spectral = kinds.pop()
        if not self.spectral and self.basis is not None:
            raise ConfigurationError("dense specs cannot carry a basis")
        dims = {spec.dim for spec in self.specs}
        if len(dims) != 1:
            raise DimensionError("client dimension mismatch")
        self.dim = dims.pop()

    @property
    def n(self) -> int:
        return len(self.specs)

    @property
    def beta(self) -> float:
        return self.specs[0].beta

    def mean_spectra(self) -> np.ndarray:
        """Client-mean eigenvalues, shape (n, d); spectral families only."""
        if not self.spectral:
            raise ConfigurationError("family has no shared eigenbasis")
        return np.stack([spec.mean_spectrum() for spec in self.specs])

    def deviation_spectra(self) -> np.ndarray:
        """Eigenvalues of the deviations ``mean_i Hessian - global mean``."""
        mean = self.mean_spectra()
        return mean - mean.mean(axis=0)

    def mean_hessians(self) -> np.ndarray:
        """Dense per-client mean Hessians, shape (n, d, d)."""
        if self.spectral and self.basis is not None:
            q = self.basis
            return np.stack(
                [(q * spec.mean_spectrum()) @ q.T for spec in self.specs]
            )
        return np.stack([spec.mean_hessian() for spec in self.specs])


class QuadraticOracle(ClientOracle):
    """First-order oracle for one :class:`QuadraticClientSpec`.

    The stochastic gradient samples one of the m quadratic components
    uniformly (the sigmoid term, being cheap and deterministic, is always
    included exactly), so it is unbiased for the full gradient.
    """

    def __init__(self, spec: QuadraticClientSpec, basis: np.ndarray | None = None):
        self.spec = spec
        self.basis = basis
        self.dim = spec.dim
        self.beta = spec.beta
        if spec.spectra is not None:
            # centers expressed in the eigenbasis; everything else is diagonal
            self._centers_eig = (
                spec.centers if basis is None else spec.centers @ basis
            )
            self._mean_spectrum = spec.mean_spectrum()
            top = float(np.max(np.abs(self._mean_spectrum)))
            low = float(np.min(self._mean_spectrum))
        else:
            self._mean_matrix = spec.matrices.mean(axis=0)
            eigs = np.linalg.eigvalsh(self._mean_matrix)
            top = float(np.max(np.abs(eigs)))
            low = float(np.min(eigs))
        self.smoothness_hint = top + 2.0 * self.beta
        modulus = low - 0.5 * self.beta
        self.convexity_hint = modulus if modulus >= 0.0 else None

    # -- quadratic structure hooks used by the exact subproblem solver ----

    @property
    def is_pure_quadratic(self) -> bool:
        return self.beta == 0.0

    def hessian_matvec(self, v: Vector) -> Vector:
        if self.spec.spectra is not None:
            if self.basis is None:
                return self._mean_spectrum * v
            return self.basis @ (self._mean_spectrum * (v @ self.basis))
        return self._mean_matrix @ v

    def linear_term(self) -> Vector:
        """Vector u with grad of the quadratic part equal to ``H x - u``."""
        if self.spec.spectra is not None:
            u_eig = np.mean(self.spec.spectra * self._centers_eig, axis=0)
            return u_eig if self.basis is None else self.basis @ u_eig
        return np.mean(
            np.einsum("jkl,jl->jk", self.spec.matrices, self.spec.centers),
            axis=0,
        )

    # -- oracle implementation --------------------------------------------

    def _component_values(self, x: Vector) -> np.ndarray:
        if self.spec.spectra is not None:
            x_eig = x if self.basis is None else x @ self.basis
            diffs = x_eig[None, :] - self._centers_eig
            return 0.5 * np.sum(self.spec.spectra * diffs * diffs, axis=1)
        diffs = x[None, :] - self.spec.centers
        av = np.einsum("jkl,jl->jk", self.spec.matrices, diffs)
        return 0.5 * np.einsum("jk,jk->j", diffs, av)

    def _component_gradients(self, x: Vector) -> np.ndarray:
        if self.spec.spectra is not None:
            x_eig = x if self.basis is None else x @ self.basis
            g_eig = self.spec.spectra * (x_eig[None, :] - self._centers_eig)
            return g_eig if self.basis is None else g_eig @ self.basis.T
        diffs = x[None, :] - self.spec.centers
        return np.einsum("jkl,jl->jk", self.spec.matrices, diffs)

    def _value(self, x: Vector) -> float:
        return float(np.mean(self._component_values(x))) + _sigmoid_value(
            x, self.beta
        )

    def _gradient(self, x: Vector) -> Vector:
        return np.mean(self._component_gradients(x), axis=0) + _sigmoid_gradient(
            x, self.beta
        )

    def stochastic_gradient(self, x, stream: RandomStream) -> Vector:
        x = self._check_input(x)
        j = int(stream.generator().integers(self.spec.m))
        if self.spec.spectra is not None:
            x_eig = x if self.basis is None else x @ self.basis
            g = self.spec.spectra[j] * (x_eig - self._centers_eig[j])
            if self.basis is not None:
                g = self.basis @ g
        else:
            g = self.spec.matrices[j] @ (x - self.spec.centers[j])
        return g + _sigmoid_gradient(x, self.beta)

    def stochastic_gradient_std(self, x) -> Vector:
        x = self._check_input(x)
        comps = self._component_gradients(x)
        return np.std(comps, axis=0)

    @property
    def stochastic_cost(self) -> float:
        return 1.0 / self.spec.m


def build_quadratic_problem(family: QuadraticFamily) -> DistributedProblem:
    """Wrap a family in oracles and fill the smoothness/convexity hints."""
    oracles = [QuadraticOracle(spec, family.basis) for spec in family.specs]
    l_clients = max(o.smoothness_hint for o in oracles)
    beta = family.beta
    if family.spectral:
        global_spectrum = family.mean_spectra().mean(axis=0)
        top = float(np.max(np.abs(global_spectrum)))
        low = float(np.min(global_spectrum))
    else:
        eigs = np.linalg.eigvalsh(family.mean_hessians().mean(axis=0))
        top = float(np.max(np.abs(eigs)))
        low = float(np.min(eigs))
    modulus = low - 0.5 * beta
    return DistributedProblem(
        clients=oracles,
        dim=family.dim,
        l_smooth=l_clients,
        l_smooth_global=top + 2.0 * beta,
        mu=modulus if modulus >= 0.0 else None,
        quadratic=family,
    )


def _client_perturbations(n: int, t: float) -> np.ndarray:
    """Zero-sum per-client shifts of magnitude t on one designated axis.

    One +t/-t pair (clients 0 and 1), everyone else at the base spectrum.
    The worst-case deviation is exactly t while the mean-square deviation
    is t*sqrt(2/n); the report carries both achieved constants.
    """
    if n == 1 or t == 0.0:
        return np.zeros(n)
    pert = np.zeros(n)
    pert[0], pert[1] = t, -t
    return pert


def gen_quadratic_problem(
    seed: int,
    n: int,
    m: int,
    d: int,
    *,
    max_norm: float,
    min_eig: float,
    target_delta: float,
    beta: float = 0.0,
):
    """Draw a synthetic quadratic instance with a targeted Hessian spread.

    All component matrices share one random orthogonal eigenbasis.  Three
    coordinates are pinned across every component: the first at
    ``max_norm`` (so the declared operator-norm cap is attained), the
    second at ``min_eig``, and a third mid-spectrum coordinate that carries
    the per-client zero-sum shifts of magnitude ``target_delta``.
    Remaining eigenvalues are drawn uniformly from
    ``[min_eig, max_norm]``; when ``min_eig`` is (near) zero, half of them
    are floored at ``1e-6`` to produce a merely-convex instance with a
    finite minimizer.

    Returns ``(problem, report)`` where the report carries the achieved
    dissimilarity constants (exact operator-norm computation).
    """
    from .dissimilarity import delta_exact_quadratic

    if n < 1 or m < 1:
        raise ConfigurationError("need n >= 1 clients and m >= 1 components")
    if d < 3:
        raise ConfigurationError("need d >= 3 for the pinned coordinates")
    if max_norm <= 0.0 or max_norm <= min_eig:
        raise ConfigurationError("require max_norm > max(min_eig, 0)")
    if target_delta < 0.0:
        raise ConfigurationError("target_delta must be non-negative")
    if target_delta > max_norm:
        raise ConfigurationError(
            "target_delta exceeds the declared operator-norm cap"
        )

    lo_clip = max(min_eig, 0.0)
    mid = 0.5 * (lo_clip + max_norm)
    if mid + target_delta > max_norm + 1e-12 or mid - target_delta < min_eig - 1e-12:
        raise ConfigurationError(
            "target_delta does not fit between min_eig and max_norm"
        )

    stream = RandomStream(seed).fork(0)
    rng = stream.generator()

    gauss = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))  # fixed sign convention

    general_convex = 0.0 <= min_eig < GENERAL_CONVEX_FLOOR
    draw_lo = GENERAL_CONVEX_FLOOR if general_convex else min_eig
    base = rng.uniform(draw_lo, max_norm, size=(m, d))
    base[:, 0] = max_norm
    base[:, 1] = draw_lo
    base[:, 2] = mid
    if general_convex:
        free = np.arange(3, d)
        base[:, free[::2]] = GENERAL_CONVEX_FLOOR

    pert = _client_perturbations(n, target_delta)
    specs = []
    for i in range(n):
        spectra = base.copy()
        spectra[:, 2] += pert[i]
        centers_eig = rng.standard_normal((m, d)) / np.sqrt(d)
        specs.append(
            QuadraticClientSpec(
                centers=centers_eig @ q.T, beta=beta, spectra=spectra
            )
        )
    family = QuadraticFamily(specs=specs, basis=q)
    problem = build_quadratic_problem(family)
    exact_report, _ = delta_exact_quadratic(family)
    return problem, exact_report
