"""Federated optimization methods built around client drift correction.

All methods share one state layout (client iterates ``x_i`` with control
variates ``h_i``, a server reference) and one grad-diff refresh helper, and
differ in the local subproblem and the communication pattern:

* ``dane_plus``: every round clients minimize
  ``f_i(x) - <h_i, x> + lam/2 ||x - ref||^2`` from the reference and the
  solutions are aggregated (mean, or one picked uniformly at random).
* ``fedred``: the doubly regularized variant; each iteration clients
  minimize ``f_i(x) - <h_i, x> + eta/2 ||x - x_i||^2 + lam/2 ||x - ref||^2``
  from their own iterate, and an independent Bernoulli(p) coin decides
  whether this iteration communicates (aggregate into a new reference).
  With ``p = 1`` and ``eta = 0`` each step degenerates to a ``dane_plus``
  round; under the start-independent exact solver the two trajectories
  agree bitwise.
* ``fedred_gd``: same geometry with the local objective linearized at the
  client iterate, giving the closed-form step
  ``x' = (eta x_i + lam ref - (g_i - h_i)) / (eta + lam)``.
* baselines ``gd``, ``scaffold``, ``scaffnew``, ``fedprox``.

Control-variate refreshes are performed lazily: a refresh is required
whenever the reference moved since the last one, and it executes (costing
n full gradient evaluations) at the start of the next step that consumes
the variates.  The values consumed are identical to refreshing at
communication time; the lazy placement keeps per-step accounting aligned
across the round-based and coin-based methods.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    ClientOracle,
    ConfigurationError,
    DistributedProblem,
    RandomStream,
    Vector,
    as_vector,
    axpy_combine,
)
from .local_solvers import (
    LocalSpec,
    SolveReport,
    StoppingRule,
    SurrogateOracle,
    schedule_e_r,
    solve_exact_quadratic,
    solve_fgd,
    solve_gd,
)

METHODS = (
    "dane_plus",
    "fedred",
    "fedred_gd",
    "gd",
    "scaffold",
    "scaffnew",
    "fedprox",
)

# stream sub-labels within one step
_LBL_THETA = 0
_LBL_PICK = 1
_LBL_BATCH = 2


@dataclass
class ClientState:
    """One client's iterate and control variate."""

    x: Vector
    h: Vector


@dataclass
class ServerState:
    """Reference point plus progress counters.

    ``h_stale`` records whether the reference moved since the grad-diff
    control variates were last refreshed.
    """

    reference: Vector
    round: int = 0
    iteration: int = 0
    comm_events: int = 0
    h_stale: bool = True


@dataclass(frozen=True)
class MethodConfig:
    """Parameters of one method run.

    ``lam`` couples clients to the server reference, ``eta`` is the second
    proximal weight for the doubly regularized methods and doubles as the
    step size for gd/scaffold/scaffnew, ``p`` is the communication
    probability, ``a`` the nonconvex reference-coupling multiplier, and
    ``cv_strength`` the recursive control-variate gain.
    """

    method: str
    lam: float = 0.0
    eta: float = 0.0
    p: float = 1.0
    mu: float = 0.0
    a: float = 2.0
    averaging: str = "avg"
    control_variate: str = "grad_diff"
    cv_strength: float = 0.0
    local: LocalSpec = LocalSpec()
    q_weighting: bool = False
    stochastic: bool = False
    local_steps: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.lam < 0.0 or self.eta < 0.0 or self.mu < 0.0:
            raise ConfigurationError("lam, eta, mu must be non-negative")
        if not 0.0 < self.p <= 1.0:
            raise ConfigurationError("p must lie in (0, 1]")
        if self.a <= 1.0:
            raise ConfigurationError("a must exceed 1")
        if self.averaging not in ("avg", "rand"):
            raise ConfigurationError(f"unknown averaging {self.averaging!r}")
        if self.control_variate not in ("grad_diff", "recursive"):
            raise ConfigurationError(
                f"unknown control variate {self.control_variate!r}"
            )
        if self.control_variate == "recursive" and self.method != "dane_plus":
            raise ConfigurationError(
                "the recursive control variate is only defined for dane_plus"
            )
        if self.method == "fedred" and self.eta != 0.0 and self.eta < self.lam:
            # eta = 0 is the exact degeneration to dane_plus and stays legal
            raise ConfigurationError("fedred requires eta >= lam (or eta = 0)")
        if self.method == "fedred_gd" and self.eta + self.lam <= 0.0:
            raise ConfigurationError("fedred_gd requires eta + lam > 0")
        if self.method in ("gd", "scaffold", "scaffnew") and self.eta <= 0.0:
            raise ConfigurationError(f"{self.method} needs a positive step eta")
        if self.method == "scaffnew" and self.averaging != "avg":
            raise ConfigurationError("scaffnew only supports mean averaging")
        if self.local_steps < 1:
            raise ConfigurationError("local_steps must be >= 1")


@dataclass
class StepRecord:
    """What one step/round did, for accounting and certificates."""

    iteration: int
    rounds: int
    communicated: bool
    grad_evals: float
    local_steps: int
    pick_index: int | None = None
    e_r: float | None = None
    premise: list[tuple[float, float]] | None = None
    decreased_all: bool = True


@dataclass
class IterateAccumulator:
    """Running output-iterate selector.

    Modes: ``last`` (server reference), ``best_f`` / ``best_grad``
    (argmin of the supplied score), and ``q_weighted`` with weights
    ``q^{-k}`` accumulated in the numerically stable normalized form
    ``acc <- q*acc + x``, ``norm <- q*norm + 1``.
    """

    mode: str = "last"
    q: float = 1.0
    _acc: Vector | None = None
    _norm: float = 0.0
    _best: Vector | None = None
    _best_score: float = np.inf

    def __post_init__(self):
        if self.mode not in ("last", "best_f", "best_grad", "q_weighted"):
            raise ConfigurationError(f"unknown accumulator mode {self.mode!r}")
        if self.mode == "q_weighted" and not 0.0 < self.q <= 1.0:
            raise ConfigurationError("q must lie in (0, 1]")

    def update(self, x: Vector, score: float | None = None):
        if self.mode == "last":
            self._best = x
        elif self.mode == "q_weighted":
            self._acc = x.copy() if self._acc is None else self.q * self._acc + x
            self._norm = self.q * self._norm + 1.0
        else:
            if score is None:
                raise ConfigurationError("best_* accumulators need a score")
            if score < self._best_score:
                self._best, self._best_score = x, score

    def output(self) -> Vector:
        if self.mode == "q_weighted":
            if self._acc is None:
                raise ConfigurationError("accumulator never updated")
            return self._acc / self._norm
        if self._best is None:
            raise ConfigurationError("accumulator never updated")
        return self._best


def control_variate_grad_diff(
    problem: DistributedProblem, point: Vector
) -> list[Vector]:
    """Grad-diff variates ``h_i = grad f_i(point) - grad f(point)``.

    Costs n gradient evaluations; the variates average to zero exactly up
    to floating-point cancellation.
    """
    grads = problem.client_gradients(point)
    mean = DistributedProblem.mean_gradient(grads)
    return [g - mean for g in grads]


def control_variate_recursive_update(
    state: ClientState, x_new_global: Vector, x_i_new: Vector, m: float
) -> Vector:
    """Recursive variate update ``h' = m (x_global - x_i) + h``.

    With mean aggregation the zero-mean property is preserved because the
    new reference is the mean of the client solutions.
    """
    return m * (x_new_global - x_i_new) + state.h


def init_method_state(
    problem: DistributedProblem, cfg: MethodConfig, x0
) -> tuple[ServerState, list[ClientState], float]:
    """Initial server/client states and the gradient cost of setup.

    Control variates start at zero (mean zero trivially) except for
    scaffnew, whose variates are seeded with grad-diff at the start point
    so that its stationarity fixed point holds from the first step.
    """
    x0 = as_vector(x0)
    if x0.shape[0] != problem.dim:
        raise ConfigurationError("start point dimension mismatch")
    init_evals = 0.0
    if cfg.method == "scaffnew":
        hs = control_variate_grad_diff(problem, x0)
        init_evals = float(problem.n)
    else:
        hs = [np.zeros(problem.dim) for _ in problem.clients]
    clients = [ClientState(x=x0.copy(), h=h.copy()) for h in hs]
    server = ServerState(reference=x0.copy())
    return server, clients, init_evals


def _ensure_fresh_variates(
    problem: DistributedProblem, server: ServerState, clients: list[ClientState]
) -> float:
    """Refresh grad-diff variates at the current reference if stale."""
    if not server.h_stale:
        return 0.0
    hs = control_variate_grad_diff(problem, server.reference)
    for state, h in zip(clients, hs):
        state.h = h
    server.h_stale = False
    return float(problem.n)


def _aggregate(xs: list[Vector], cfg: MethodConfig, pick_index: int | None) -> Vector:
    if cfg.averaging == "rand":
        return xs[pick_index].copy()
    return np.mean(np.stack(xs), axis=0)


def _pick_index(cfg: MethodConfig, step_stream: RandomStream, n: int) -> int | None:
    if cfg.averaging != "rand":
        return None
    return int(step_stream.fork(_LBL_PICK).generator().integers(n))


def _draw_theta(cfg: MethodConfig, step_stream: RandomStream) -> bool:
    if cfg.p >= 1.0:
        return True
    return bool(step_stream.fork(_LBL_THETA).generator().random() < cfg.p)


def _resolve_rule(cfg: MethodConfig, round_index: int) -> tuple[StoppingRule, float | None]:
    spec = cfg.local
    if spec.schedule:
        e_r = schedule_e_r(round_index, cfg.lam, cfg.mu)
        return (
            StoppingRule("rel_grad", tol=e_r, max_steps=spec.rule.max_steps),
            e_r,
        )
    tol = spec.rule.tol if spec.rule.kind in ("abs_grad", "rel_grad") else None
    return spec.rule, tol


def _solve_local(
    cfg: MethodConfig, surrogate: SurrogateOracle, start: Vector, rule: StoppingRule
) -> SolveReport:
    solver = cfg.local.solver
    if solver == "exact":
        return solve_exact_quadratic(surrogate, start)
    if solver == "gd":
        return solve_gd(
            surrogate,
            start,
            rule,
            step=cfg.local.step,
            require_decrease=cfg.local.check_decrease,
        )
    if solver == "fgd":
        return solve_fgd(
            surrogate,
            start,
            rule,
            step=cfg.local.step,
            require_decrease=cfg.local.check_decrease,
        )
    raise ConfigurationError(f"unknown local solver {solver!r}")


def _client_gradient(
    oracle: ClientOracle, x: Vector, cfg: MethodConfig, client_stream: RandomStream
) -> tuple[Vector, float]:
    """Gradient (or stochastic gradient) plus its accounting cost."""
    if not cfg.stochastic:
        return oracle.gradient(x), 1.0
    return (
        oracle.stochastic_gradient(x, client_stream),
        oracle.stochastic_cost,
    )


def dane_plus_round(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """One round: refresh variates, solve anchored subproblems, aggregate."""
    if cfg.method != "dane_plus":
        raise ConfigurationError("config is not a dane_plus config")
    step_stream = stream.fork(server.iteration)
    evals = 0.0
    if cfg.control_variate == "grad_diff":
        evals += _ensure_fresh_variates(problem, server, clients)
    rule, e_r = _resolve_rule(cfg, server.round)
    ref = server.reference
    solutions = []
    premise = []
    local_steps = 0
    decreased_all = True
    for oracle, state in zip(problem.clients, clients):
        surrogate = SurrogateOracle(
            oracle, linear_shift=-state.h, prox_terms=((cfg.lam, ref),)
        )
        report = _solve_local(cfg, surrogate, ref, rule)
        solutions.append(report.solution)
        evals += report.grad_evals
        local_steps += report.steps_taken
        decreased_all = decreased_all and report.decreased
        premise.append(
            (report.final_grad_norm, float(np.linalg.norm(report.solution - ref)))
        )
    pick = _pick_index(cfg, step_stream, problem.n)
    new_ref = _aggregate(solutions, cfg, pick)
    for state, solution in zip(clients, solutions):
        state.x = solution
    if cfg.control_variate == "recursive":
        for state, solution in zip(clients, solutions):
            state.h = control_variate_recursive_update(
                state, new_ref, solution, cfg.cv_strength
            )
    server.reference = new_ref
    server.h_stale = True
    server.round += 1
    server.iteration += 1
    server.comm_events += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=True,
        grad_evals=evals,
        local_steps=local_steps,
        pick_index=pick,
        e_r=e_r,
        premise=premise,
        decreased_all=decreased_all,
    )
    return server, clients, record


def fedred_step(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """One doubly regularized iteration with a Bernoulli(p) communication coin."""
    if cfg.method != "fedred":
        raise ConfigurationError("config is not a fedred config")
    step_stream = stream.fork(server.iteration)
    evals = _ensure_fresh_variates(problem, server, clients)
    rule, e_r = _resolve_rule(cfg, server.round)
    ref = server.reference
    solutions = []
    premise = []
    local_steps = 0
    decreased_all = True
    for oracle, state in zip(problem.clients, clients):
        prox_terms = []
        if cfg.eta > 0.0:
            prox_terms.append((cfg.eta, state.x))
        prox_terms.append((cfg.lam, ref))
        surrogate = SurrogateOracle(
            oracle, linear_shift=-state.h, prox_terms=tuple(prox_terms)
        )
        report = _solve_local(cfg, surrogate, state.x, rule)
        solutions.append(report.solution)
        evals += report.grad_evals
        local_steps += report.steps_taken
        decreased_all = decreased_all and report.decreased
        premise.append(
            (report.final_grad_norm, float(np.linalg.norm(report.solution - ref)))
        )
    pick = _pick_index(cfg, step_stream, problem.n)
    theta = _draw_theta(cfg, step_stream)
    for state, solution in zip(clients, solutions):
        state.x = solution
    if theta:
        server.reference = _aggregate(solutions, cfg, pick)
        server.h_stale = True
        server.round += 1
        server.comm_events += 1
    server.iteration += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=theta,
        grad_evals=evals,
        local_steps=local_steps,
        pick_index=pick,
        e_r=e_r,
        premise=premise,
        decreased_all=decreased_all,
    )
    return server, clients, record


def fedred_gd_step(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """Closed-form doubly regularized step on the linearized local model."""
    if cfg.method != "fedred_gd":
        raise ConfigurationError("config is not a fedred_gd config")
    step_stream = stream.fork(server.iteration)
    evals = _ensure_fresh_variates(problem, server, clients)
    ref = server.reference
    total = cfg.eta + cfg.lam
    solutions = []
    for i, (oracle, state) in enumerate(zip(problem.clients, clients)):
        g, cost = _client_gradient(
            oracle, state.x, cfg, step_stream.fork(_LBL_BATCH).fork(i)
        )
        evals += cost
        solutions.append(
            axpy_combine(
                [cfg.eta / total, cfg.lam / total, -1.0 / total],
                [state.x, ref, g - state.h],
            )
        )
    pick = _pick_index(cfg, step_stream, problem.n)
    theta = _draw_theta(cfg, step_stream)
    for state, solution in zip(clients, solutions):
        state.x = solution
    if theta:
        server.reference = _aggregate(solutions, cfg, pick)
        server.h_stale = True
        server.round += 1
        server.comm_events += 1
    server.iteration += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=theta,
        grad_evals=evals,
        local_steps=1,
        pick_index=pick,
    )
    return server, clients, record


def baseline_gd_round(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """Centralized gradient descent: one full gradient per round."""
    if cfg.method != "gd":
        raise ConfigurationError("config is not a gd config")
    grad = problem.grad_f(server.reference)
    server.reference = server.reference - cfg.eta * grad
    for state in clients:
        state.x = server.reference.copy()
    server.h_stale = True
    server.round += 1
    server.iteration += 1
    server.comm_events += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=True,
        grad_evals=float(problem.n),
        local_steps=1,
    )
    return server, clients, record


def baseline_scaffold_round(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """Variance-reduced local steps: K corrected gradient steps, then average."""
    if cfg.method != "scaffold":
        raise ConfigurationError("config is not a scaffold config")
    server.h_stale = True
    evals = _ensure_fresh_variates(problem, server, clients)
    solutions = []
    for oracle, state in zip(problem.clients, clients):
        x = server.reference
        for _ in range(cfg.local_steps):
            x = x - cfg.eta * (oracle.gradient(x) - state.h)
            evals += 1.0
        solutions.append(x)
    new_ref = np.mean(np.stack(solutions), axis=0)
    for state, solution in zip(clients, solutions):
        state.x = solution
    server.reference = new_ref
    server.h_stale = True
    server.round += 1
    server.iteration += 1
    server.comm_events += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=True,
        grad_evals=evals,
        local_steps=cfg.local_steps * problem.n,
    )
    return server, clients, record


def baseline_scaffnew_step(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """Proximal-skip step: corrected gradient step, occasional average.

    On communication the variates move by ``(p/gamma)(mean - x_hat_i)``, a
    telescoping update that keeps their mean at zero.
    """
    if cfg.method != "scaffnew":
        raise ConfigurationError("config is not a scaffnew config")
    step_stream = stream.fork(server.iteration)
    gamma = cfg.eta
    hats = []
    for oracle, state in zip(problem.clients, clients):
        hats.append(state.x - gamma * (oracle.gradient(state.x) - state.h))
    theta = _draw_theta(cfg, step_stream)
    if theta:
        mean = np.mean(np.stack(hats), axis=0)
        for state, hat in zip(clients, hats):
            state.h = state.h + (cfg.p / gamma) * (mean - hat)
            state.x = mean.copy()
        server.reference = mean
        server.round += 1
        server.comm_events += 1
    else:
        for state, hat in zip(clients, hats):
            state.x = hat
    server.iteration += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=theta,
        grad_evals=float(problem.n),
        local_steps=1,
    )
    return server, clients, record


def baseline_fedprox_round(
    problem: DistributedProblem,
    server: ServerState,
    clients: list[ClientState],
    cfg: MethodConfig,
    stream: RandomStream,
) -> tuple[ServerState, list[ClientState], StepRecord]:
    """Proximal local minimization without drift correction, then average."""
    if cfg.method != "fedprox":
        raise ConfigurationError("config is not a fedprox config")
    rule, e_r = _resolve_rule(cfg, server.round)
    ref = server.reference
    solutions = []
    evals = 0.0
    local_steps = 0
    for oracle in problem.clients:
        surrogate = SurrogateOracle(oracle, prox_terms=((cfg.lam, ref),))
        report = _solve_local(cfg, surrogate, ref, rule)
        solutions.append(report.solution)
        evals += report.grad_evals
        local_steps += report.steps_taken
    new_ref = np.mean(np.stack(solutions), axis=0)
    for state, solution in zip(clients, solutions):
        state.x = solution
    server.reference = new_ref
    server.h_stale = True
    server.round += 1
    server.iteration += 1
    server.comm_events += 1
    record = StepRecord(
        iteration=server.iteration,
        rounds=server.comm_events,
        communicated=True,
        grad_evals=evals,
        local_steps=local_steps,
        e_r=e_r,
    )
    return server, clients, record


_STEP_FUNCTIONS = {
    "dane_plus": dane_plus_round,
    "fedred": fedred_step,
    "fedred_gd": fedred_gd_step,
    "gd": baseline_gd_round,
    "scaffold": baseline_scaffold_round,
    "scaffnew": baseline_scaffnew_step,
    "fedprox": baseline_fedprox_round,
}


def step_method(problem, server, clients, cfg, stream):
    """Advance the configured method by one step/round."""
    return _STEP_FUNCTIONS[cfg.method](problem, server, clients, cfg, stream)


def suggest_parameters(
    method: str,
    report,
    regime: str,
    *,
    l_smooth: float,
    mu: float = 0.0,
    sigma: float = 0.0,
    eps: float | None = None,
    a: float = 2.0,
) -> MethodConfig:
    """Fill lam/eta/p from the dissimilarity report per the known rules.

    Convex/strongly convex regimes follow the practical coupling
    ``lam = p * eta`` with the communication probability taken from the
    corresponding rate statement (for the doubly regularized methods the
    probability has the order ``delta / L``); the nonconvex rules are
    emitted verbatim.  The nonconvex linearized rule
    (``lam = delta_B, p = delta_B/L``) intentionally breaks the practical
    coupling because its guarantee is stated for that exact triple.
    """
    if regime not in ("sc", "cvx", "ncvx"):
        raise ConfigurationError(f"unknown regime {regime!r}")
    if l_smooth is None or l_smooth <= 0.0:
        raise ConfigurationError("a positive smoothness constant is required")
    if regime == "sc" and mu <= 0.0:
        raise ConfigurationError("the sc regime needs mu > 0")
    mu = mu if regime == "sc" else 0.0
    delta_a, delta_b = report.delta_a, report.delta_b

    if method == "gd":
        return MethodConfig(method="gd", eta=1.0 / l_smooth, mu=mu)

    if method == "dane_plus":
        if regime == "ncvx":
            if delta_b <= 0.0:
                raise ConfigurationError("nonconvex rule needs delta_b > 0")
            return MethodConfig(
                method="dane_plus",
                lam=a * delta_b,
                a=a,
                averaging="rand",
                local=LocalSpec(
                    solver="gd",
                    rule=StoppingRule("fixed_steps", steps=200),
                    check_decrease=True,
                ),
            )
        if delta_a <= 0.0:
            raise ConfigurationError("convex rule needs delta_a > 0")
        return MethodConfig(
            method="dane_plus",
            lam=2.0 * delta_a,
            mu=mu,
            local=LocalSpec(solver="gd", rule=StoppingRule("rel_grad", tol=1.0), schedule=True),
        )

    if method == "fedred":
        if regime == "ncvx":
            if delta_b <= 0.0:
                raise ConfigurationError("nonconvex rule needs delta_b > 0")
            return MethodConfig(
                method="fedred",
                lam=delta_b,
                eta=4.0 * delta_b,
                p=0.25,
                averaging="rand",
                local=LocalSpec(
                    solver="gd",
                    rule=StoppingRule("abs_grad", tol=1e-9),
                    check_decrease=True,
                ),
            )
        if delta_a <= 0.0:
            raise ConfigurationError("convex rule needs delta_a > 0")
        eta = max(l_smooth, delta_a)
        p = (delta_a + 0.5 * mu) / (eta + 0.5 * mu)
        return MethodConfig(
            method="fedred",
            lam=p * eta,
            eta=eta,
            p=p,
            mu=mu,
            local=LocalSpec(solver="exact"),
        )

    if method == "fedred_gd":
        if regime == "ncvx":
            if delta_b <= 0.0:
                raise ConfigurationError("nonconvex rule needs delta_b > 0")
            if sigma > 0.0:
                if eps is None or eps <= 0.0:
                    raise ConfigurationError(
                        "stochastic nonconvex rule needs a target accuracy"
                    )
                raise ConfigurationError(
                    "stochastic horizon-dependent eta not supported here; "
                    "set sigma=0 or pass an explicit config"
                )
            return MethodConfig(
                method="fedred_gd",
                lam=delta_b,
                eta=6.0 * l_smooth,
                p=min(1.0, delta_b / l_smooth),
                averaging="rand",
            )
        if delta_a <= 0.0:
            raise ConfigurationError("convex rule needs delta_a > 0")
        eta = l_smooth
        if sigma > 0.0:
            if eps is None or eps <= 0.0:
                raise ConfigurationError("stochastic rule needs a target accuracy")
            eta = sigma * sigma / eps + l_smooth
        if eta <= 0.5 * mu:
            raise ConfigurationError("eta must exceed mu/2")
        p = min(1.0, (delta_a + 0.5 * mu) / (eta - 0.5 * mu))
        return MethodConfig(
            method="fedred_gd",
            lam=p * eta,
            eta=eta,
            p=p,
            mu=mu,
            stochastic=sigma > 0.0,
        )

    if method == "scaffnew":
        if regime != "sc":
            raise ConfigurationError("scaffnew rule is stated for the sc regime")
        return MethodConfig(
            method="scaffnew",
            eta=1.0 / l_smooth,
            p=float(np.sqrt(mu / l_smooth)),
            mu=mu,
        )

    raise ConfigurationError(f"no parameter rule for method {method!r}")
