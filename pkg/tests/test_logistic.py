"""Regularized logistic loss over partitioned sparse data."""
import numpy as np
import pytest

from fedlab import (
    ConfigurationError,
    RandomStream,
    dirichlet_partition,
    finite_difference_gradient,
    logistic_problem,
    parse_libsvm,
)


def _toy_dataset(rows: int = 24, dim: int = 6, seed: int = 15):
    rng = RandomStream(seed).generator()
    lines = []
    for _ in range(rows):
        label = "+1" if rng.random() < 0.5 else "-1"
        feats = sorted(rng.choice(dim, size=3, replace=False) + 1)
        parts = [label] + [f"{j}:{rng.standard_normal():.4f}" for j in feats]
        lines.append(" ".join(str(p) for p in parts))
    return parse_libsvm("\n".join(lines) + "\n")


def test_value_at_origin_is_log_two():
    ds = _toy_dataset()
    parts = dirichlet_partition(ds, 3, 1.0, RandomStream(0))
    problem = logistic_problem(parts)
    assert problem.f(np.zeros(problem.dim)) == pytest.approx(np.log(2.0), rel=1e-12)


def test_single_point_gradient_at_origin():
    # one positive row with feature e_1: grad at 0 is -sigmoid(0) * e_1
    ds = parse_libsvm("+1 1:1\n")
    problem = logistic_problem([ds])
    g = problem.grad_f(np.zeros(1))
    assert g[0] == pytest.approx(-0.5, abs=1e-14)


def test_partitioned_objective_equals_pooled():
    ds = _toy_dataset(rows=30)
    pooled = logistic_problem([ds])
    parts = dirichlet_partition(ds, 5, 0.7, RandomStream(1))
    split = logistic_problem(parts)
    rng = RandomStream(8).generator()
    for _ in range(4):
        x = rng.standard_normal(ds.dim)
        assert split.f(x) == pytest.approx(pooled.f(x), rel=1e-12)
        assert np.allclose(split.grad_f(x), pooled.grad_f(x), atol=1e-12)


def test_gradient_matches_finite_differences():
    ds = _toy_dataset()
    problem = logistic_problem(dirichlet_partition(ds, 2, 1.0, RandomStream(4)))
    rng = RandomStream(10).generator()
    for oracle in problem.clients:
        x = rng.standard_normal(problem.dim)
        fd = finite_difference_gradient(oracle.value, x)
        g = oracle.gradient(x)
        assert np.linalg.norm(fd - g) <= 1e-5 * (1 + np.linalg.norm(g))


def test_partition_covers_every_row_once():
    ds = _toy_dataset(rows=40)
    parts = dirichlet_partition(ds, 4, 0.5, RandomStream(2))
    assert sum(p.n_rows for p in parts) == ds.n_rows
    seen = sorted(
        (float(lbl), tuple(sorted(row.items())))
        for p in parts
        for lbl, row in zip(p.labels, p.rows)
    )
    original = sorted(
        (float(lbl), tuple(sorted(row.items())))
        for lbl, row in zip(ds.labels, ds.rows)
    )
    assert seen == original
    for p in parts:
        assert p.n_rows >= 1
        assert p.dim == ds.dim


def test_partition_is_deterministic_and_seed_sensitive():
    ds = _toy_dataset(rows=40)
    a = dirichlet_partition(ds, 4, 0.5, RandomStream(2))
    b = dirichlet_partition(ds, 4, 0.5, RandomStream(2))
    c = dirichlet_partition(ds, 4, 0.5, RandomStream(3))
    assert [p.n_rows for p in a] == [p.n_rows for p in b]
    assert all(np.array_equal(x.labels, y.labels) for x, y in zip(a, b))
    assert [p.n_rows for p in a] != [p.n_rows for p in c] or not all(
        np.array_equal(x.labels, y.labels) for x, y in zip(a, c)
    )


def test_partition_validates_inputs():
    ds = _toy_dataset(rows=6)
    with pytest.raises(ConfigurationError):
        dirichlet_partition(ds, 7, 0.5, RandomStream(0))  # more clients than rows
    with pytest.raises(ConfigurationError):
        dirichlet_partition(ds, 0, 0.5, RandomStream(0))
    with pytest.raises(ConfigurationError):
        dirichlet_partition(ds, 2, 0.0, RandomStream(0))


def test_low_alpha_is_more_skewed_than_high_alpha():
    ds = _toy_dataset(rows=200, seed=3)
    skewed = dirichlet_partition(ds, 4, 0.05, RandomStream(5))
    flat = dirichlet_partition(ds, 4, 100.0, RandomStream(5))
    spread = lambda parts: np.std([p.n_rows for p in parts])
    assert spread(skewed) > spread(flat)


def test_stochastic_gradient_is_unbiased():
    ds = _toy_dataset(rows=16)
    problem = logistic_problem([ds], batch_size=4)
    oracle = problem.clients[0]
    x = RandomStream(6).generator().standard_normal(problem.dim)
    full = oracle.gradient(x)
    std = oracle.stochastic_gradient_std(x)
    draws = 4000
    acc = np.zeros(problem.dim)
    stream = RandomStream(31)
    for k in range(draws):
        acc += oracle.stochastic_gradient(x, stream.fork(k))
    mean = acc / draws
    band = 4.0 * std / np.sqrt(draws) + 1e-12
    assert np.all(np.abs(mean - full) <= band)


def test_stochastic_cost_scales_with_batch():
    ds = _toy_dataset(rows=16)
    cheap = logistic_problem([ds], batch_size=4).clients[0]
    exact = logistic_problem([ds]).clients[0]
    assert cheap.stochastic_cost == pytest.approx(0.25)
    assert exact.stochastic_cost == 1.0


def test_smoothness_hint_bounds_gradient_lipschitz():
    ds = _toy_dataset(rows=20)
    problem = logistic_problem([ds])
    oracle = problem.clients[0]
    rng = RandomStream(9).generator()
    for _ in range(10):
        x = rng.standard_normal(problem.dim)
        y = rng.standard_normal(problem.dim)
        lhs = np.linalg.norm(oracle.gradient(x) - oracle.gradient(y))
        assert lhs <= oracle.smoothness_hint * np.linalg.norm(x - y) + 1e-12


def test_problem_metadata():
    ds = _toy_dataset(rows=18)
    parts = dirichlet_partition(ds, 3, 1.0, RandomStream(7))
    problem = logistic_problem(parts)
    assert problem.mu == pytest.approx(1.0 / 18.0)
    assert problem.l_smooth_global <= problem.l_smooth + 1e-12
    with pytest.raises(ConfigurationError):
        logistic_problem([])
    other = parse_libsvm("+1 1:1 9:1\n")
    with pytest.raises(ConfigurationError):
        logistic_problem([ds, other])
