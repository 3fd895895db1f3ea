"""Client-side subproblem solvers for regularized local objectives.

A local subproblem is a :class:`SurrogateOracle`

    F(x) = f_base(x) + <shift, x> + sum_j w_j/2 * ||x - c_j||^2,

covering both the single-anchor form (one proximal term at the server
reference, shift = minus a control variate) and the doubly regularized
form (anchors at the client iterate and the server reference).

Solvers: plain gradient descent, Nesterov-accelerated gradient descent,
and a conjugate-gradient solve for pure quadratic bases.  Stopping is
controlled by a :class:`StoppingRule`:

* ``abs_grad``:  stop when ``||grad F(x)|| <= e``;
* ``rel_grad``:  stop when ``||grad F(x)|| <= e * ||x - x_start||`` (at the
  start both sides are zero, so an already-stationary start is accepted
  immediately);
* ``fixed_steps``: run exactly K steps and return the visited iterate with
  the smallest gradient norm.

Gradient-based rules exhaust ``max_steps`` with a hard error rather than
returning an uncertified point.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ClientOracle,
    ConfigurationError,
    RandomStream,
    Vector,
    as_vector,
)


class SolverBudgetError(RuntimeError):
    """A gradient-based stopping rule was not met within ``max_steps``."""


class UnsupportedStructureError(TypeError):
    """The requested solver needs structure the oracle does not expose."""


_DECREASE_SLACK = 1e-12
EXACT_RESIDUAL_REL = 1e-12


@dataclass(frozen=True)
class StoppingRule:
    """When a local solver may return; see module docstring for semantics."""

    kind: str  # "abs_grad" | "rel_grad" | "fixed_steps" | "exact"
    tol: float = 0.0
    steps: int = 0
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.kind not in ("abs_grad", "rel_grad", "fixed_steps", "exact"):
            raise ConfigurationError(f"unknown stopping rule {self.kind!r}")
        if self.kind in ("abs_grad", "rel_grad") and self.tol <= 0.0:
            raise ConfigurationError("gradient rules need a positive tolerance")
        if self.kind == "fixed_steps" and self.steps < 0:
            raise ConfigurationError("fixed_steps needs steps >= 0")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")

    def accepts(self, grad_norm: float, dist_from_start: float) -> bool:
        if self.kind == "abs_grad":
            return grad_norm <= self.tol
        if self.kind == "rel_grad":
            return grad_norm <= self.tol * dist_from_start
        return False


@dataclass
class SolveReport:
    """Outcome of one local solve."""

    solution: Vector
    steps_taken: int
    grad_evals: int
    final_grad_norm: float
    decreased: bool
    exact: bool = False


@dataclass(frozen=True)
class LocalSpec:
    """How a method solves its local subproblems.

    ``solver`` is one of ``exact`` (conjugate gradients on quadratic
    structure), ``gd``, or ``fgd``.  With ``schedule`` set, the stopping
    rule becomes ``rel_grad`` with the decaying per-round tolerance from
    :func:`schedule_e_r` (the supplied rule then only caps ``max_steps``).
    ``step`` overrides the default ``1/smoothness_hint`` step size.
    """

    solver: str = "exact"
    rule: StoppingRule = StoppingRule("abs_grad", tol=1e-9)
    schedule: bool = False
    check_decrease: bool = False
    step: float | None = None

    def __post_init__(self):
        if self.solver not in ("exact", "gd", "fgd"):
            raise ConfigurationError(f"unknown local solver {self.solver!r}")
        if self.step is not None and self.step <= 0.0:
            raise ConfigurationError("step override must be positive")
        if self.schedule and self.solver == "exact":
            raise ConfigurationError("tolerance schedules need an inexact solver")


class SurrogateOracle(ClientOracle):
    """Base objective plus a linear shift and quadratic proximal terms."""

    def __init__(
        self,
        base: ClientOracle,
        linear_shift: Vector | None = None,
        prox_terms: tuple[tuple[float, Vector], ...] = (),
    ):
        self.base = base
        self.dim = base.dim
        self.linear_shift = (
            None if linear_shift is None else as_vector(linear_shift)
        )
        if self.linear_shift is not None and self.linear_shift.shape[0] != self.dim:
            raise ConfigurationError("linear shift dimension mismatch")
        terms = []
        for weight, center in prox_terms:
            if weight < 0.0:
                raise ConfigurationError("proximal weights must be >= 0")
            center = as_vector(center)
            if center.shape[0] != self.dim:
                raise ConfigurationError("proximal center dimension mismatch")
            terms.append((float(weight), center))
        self.prox_terms = tuple(terms)
        self.total_prox_weight = float(sum(w for w, _ in self.prox_terms))
        if base.smoothness_hint is not None:
            self.smoothness_hint = base.smoothness_hint + self.total_prox_weight
        else:
            self.smoothness_hint = None
        if base.convexity_hint is not None:
            self.convexity_hint = base.convexity_hint + self.total_prox_weight
        else:
            self.convexity_hint = None

    def _value(self, x: Vector) -> float:
        v = self.base.value(x)
        if self.linear_shift is not None:
            v += float(self.linear_shift @ x)
        for weight, center in self.prox_terms:
            diff = x - center
            v += 0.5 * weight * float(diff @ diff)
        return v

    def _gradient(self, x: Vector) -> Vector:
        g = self.base.gradient(x)
        if self.linear_shift is not None:
            g = g + self.linear_shift
        for weight, center in self.prox_terms:
            g = g + weight * (x - center)
        return g


def schedule_e_r(round_index: int, lam: float, mu: float = 0.0) -> float:
    """Per-round relative-accuracy sequence ``sqrt(lam*(mu+lam)/(8(r+1)(r+2)))``.

    The squares telescope: summed over all rounds they total
    ``lam*(mu+lam)/8``, the budget under which inexact single-anchor
    solves retain the exact-solve convergence guarantee.
    """
    if lam <= 0.0:
        raise ConfigurationError("the proximal weight must be positive")
    if mu < 0.0:
        raise ConfigurationError("mu must be non-negative")
    if round_index < 0:
        raise ConfigurationError("round_index must be non-negative")
    r = float(round_index)
    return float(np.sqrt(lam * (mu + lam) / (8.0 * (r + 1.0) * (r + 2.0))))


def _default_step(surrogate: ClientOracle, step: float | None) -> float:
    if step is not None:
        if step <= 0.0:
            raise ConfigurationError("step size must be positive")
        return step
    if surrogate.smoothness_hint is None or surrogate.smoothness_hint <= 0.0:
        raise ConfigurationError(
            "no smoothness hint available; pass an explicit step size"
        )
    return 1.0 / surrogate.smoothness_hint


def _finish(
    surrogate: ClientOracle,
    x_start: Vector,
    solution: Vector,
    steps: int,
    evals: int,
    grad_norm: float,
    require_decrease: bool,
    exact: bool = False,
) -> SolveReport:
    f_start = surrogate.value(x_start)
    f_end = surrogate.value(solution)
    decreased = f_end <= f_start + _DECREASE_SLACK * (1.0 + abs(f_start))
    if require_decrease and not decreased:
        raise SolverBudgetError(
            f"local solve increased the objective: {f_start} -> {f_end}"
        )
    return SolveReport(
        solution=solution,
        steps_taken=steps,
        grad_evals=evals,
        final_grad_norm=grad_norm,
        decreased=decreased,
        exact=exact,
    )


def solve_gd(
    surrogate: ClientOracle,
    x_start,
    rule: StoppingRule,
    step: float | None = None,
    require_decrease: bool = False,
) -> SolveReport:
    """Gradient descent with step ``1/(L_base + total prox weight)``.

    Under ``fixed_steps`` (and after an ``abs_grad`` rule fires) the
    returned point is the visited iterate with the smallest gradient norm,
    which is the right certificate on nonconvex objectives; under
    ``rel_grad`` the firing iterate itself is returned since the rule is
    relative to that iterate's own distance from the start.
    """
    if rule.kind == "exact":
        raise ConfigurationError("the exact rule requires the quadratic solver")
    x_start = as_vector(x_start)
    gamma = _default_step(surrogate, step)
    x = x_start
    best_x, best_norm = x_start, np.inf
    evals = 0
    steps = 0
    while True:
        g = surrogate.gradient(x)
        evals += 1
        norm = float(np.linalg.norm(g))
        if norm < best_norm:
            best_x, best_norm = x, norm
        if rule.kind == "fixed_steps":
            if steps >= rule.steps:
                return _finish(
                    surrogate, x_start, best_x, steps, evals, best_norm,
                    require_decrease,
                )
        elif rule.accepts(norm, float(np.linalg.norm(x - x_start))):
            if rule.kind == "abs_grad":
                return _finish(
                    surrogate, x_start, best_x, steps, evals, best_norm,
                    require_decrease,
                )
            return _finish(
                surrogate, x_start, x, steps, evals, norm, require_decrease
            )
        if steps >= rule.max_steps:
            raise SolverBudgetError(
                f"{rule.kind} rule unmet after {rule.max_steps} steps "
                f"(||grad|| = {norm:.3e})"
            )
        x = x - gamma * g
        steps += 1


def solve_fgd(
    surrogate: ClientOracle,
    x_start,
    rule: StoppingRule,
    step: float | None = None,
    require_decrease: bool = False,
) -> SolveReport:
    """Nesterov-accelerated descent.

    With a known strong-convexity modulus the constant momentum
    ``(sqrt(kappa)-1)/(sqrt(kappa)+1)`` is used; otherwise the convex
    schedule ``t/(t+3)``.  Stopping rules are evaluated at the
    extrapolated points, whose gradients are computed anyway, so each
    iteration costs one gradient.
    """
    if rule.kind == "exact":
        raise ConfigurationError("the exact rule requires the quadratic solver")
    x_start = as_vector(x_start)
    gamma = _default_step(surrogate, step)
    lipschitz = 1.0 / gamma
    modulus = surrogate.convexity_hint
    momentum_const = None
    if modulus is not None and modulus > 0.0:
        root_kappa = np.sqrt(lipschitz / modulus)
        momentum_const = (root_kappa - 1.0) / (root_kappa + 1.0)
    x = y = x_start
    best_x, best_norm = x_start, np.inf
    evals = 0
    steps = 0
    while True:
        g = surrogate.gradient(y)
        evals += 1
        norm = float(np.linalg.norm(g))
        if norm < best_norm:
            best_x, best_norm = y, norm
        if rule.kind == "fixed_steps":
            if steps >= rule.steps:
                return _finish(
                    surrogate, x_start, best_x, steps, evals, best_norm,
                    require_decrease,
                )
        elif rule.accepts(norm, float(np.linalg.norm(y - x_start))):
            if rule.kind == "abs_grad":
                return _finish(
                    surrogate, x_start, best_x, steps, evals, best_norm,
                    require_decrease,
                )
            return _finish(
                surrogate, x_start, y, steps, evals, norm, require_decrease
            )
        if steps >= rule.max_steps:
            raise SolverBudgetError(
                f"{rule.kind} rule unmet after {rule.max_steps} steps "
                f"(||grad|| = {norm:.3e})"
            )
        x_new = y - gamma * g
        beta = (
            momentum_const
            if momentum_const is not None
            else steps / (steps + 3.0)
        )
        y = x_new + beta * (x_new - x)
        x = x_new
        steps += 1


def solve_exact_quadratic(
    surrogate: SurrogateOracle, x_start=None
) -> SolveReport:
    """Solve the surrogate exactly when the base objective is quadratic.

    Runs conjugate gradients on ``(H + w I) x = rhs`` down to a residual of
    ``1e-12 * ||rhs||``.  The iteration always starts from the zero vector,
    so the returned solution is a deterministic function of the subproblem
    alone (warm starts cannot perturb it); ``x_start`` only provides the
    reference point for the decrease flag.
    """
    if not isinstance(surrogate, SurrogateOracle):
        raise UnsupportedStructureError("expected a SurrogateOracle")
    base = surrogate.base
    if not (
        hasattr(base, "is_pure_quadratic")
        and base.is_pure_quadratic
        and hasattr(base, "hessian_matvec")
    ):
        raise UnsupportedStructureError(
            "exact solve needs a pure quadratic base oracle"
        )
    weight = surrogate.total_prox_weight
    rhs = base.linear_term()
    if surrogate.linear_shift is not None:
        rhs = rhs - surrogate.linear_shift
    for w, center in surrogate.prox_terms:
        rhs = rhs + w * center

    def matvec(v: Vector) -> Vector:
        return base.hessian_matvec(v) + weight * v

    d = rhs.shape[0]
    x = np.zeros(d)
    r = rhs.copy()
    target = EXACT_RESIDUAL_REL * float(np.linalg.norm(rhs))
    res_norm = float(np.linalg.norm(r))
    p = r.copy()
    rs_old = float(r @ r)
    iters = 0
    matvecs = 0
    max_iters = max(50, 25 * d)
    while res_norm > target and iters < max_iters:
        ap = matvec(p)
        matvecs += 1
        curvature = float(p @ ap)
        if curvature <= 0.0:
            raise UnsupportedStructureError(
                "subproblem matrix is not positive definite"
            )
        alpha = rs_old / curvature
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        res_norm = float(np.sqrt(rs_new))
        p = r + (rs_new / rs_old) * p
        rs_old = rs_new
        iters += 1
    if res_norm > target:
        raise SolverBudgetError(
            f"conjugate gradients stalled at residual {res_norm:.3e}"
        )
    start = as_vector(x_start) if x_start is not None else np.zeros(d)
    return _finish(
        surrogate,
        start,
        x,
        iters,
        max(matvecs, 1),
        res_norm,
        require_decrease=False,
        exact=True,
    )
