import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdenoise.local_prior import (
    GradientField,
    _laplacian_symbol,
    div,
    grad,
    hyper_energy,
    quadratic_u_step,
    shrink23,
    solve_u,
    u_objective,
)


def test_grad_examples():
    assert not np.any(grad(np.full((3, 4), 7.0)).gx)
    np.testing.assert_array_equal(grad(np.array([[0.0, 3.0]])).gx, [[3, -3]])
    np.testing.assert_array_equal(grad(np.arange(4.0)[None, :]).gx, [[1, 1, 1, -3]])
    np.testing.assert_array_equal(grad(np.arange(4.0)[:, None]).gy.ravel(), [1, 1, 1, -3])


def test_grad_linear(rng):
    x, y = rng.normal(size=(2, 9, 7))
    lhs = grad(2.5 * x - 1.5 * y)
    gx, gy = grad(x)
    hx, hy = grad(y)
    np.testing.assert_allclose(lhs.gx, 2.5 * gx - 1.5 * hx, atol=1e-12)
    np.testing.assert_allclose(lhs.gy, 2.5 * gy - 1.5 * hy, atol=1e-12)


def test_div_examples():
    z = np.zeros((5, 5))
    np.testing.assert_array_equal(div(GradientField(z, z)), z)
    np.testing.assert_array_equal(div(grad(np.full((5, 5), 3.0))), z)


@pytest.mark.parametrize("seed", range(10))
def test_adjoint_identity(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(8, 8))
    f = GradientField(*r.normal(size=(2, 8, 8)))
    g = grad(x)
    lhs = np.sum(g.gx * f.gx) + np.sum(g.gy * f.gy)
    assert lhs == pytest.approx(-np.sum(x * div(f)), abs=1e-12)


def test_hyper_energy():
    assert hyper_energy(np.full((4, 4), 2.0)) == 0
    assert hyper_energy(np.array([[0.0, 8.0]])) == pytest.approx(8.0)
    assert hyper_energy(np.random.default_rng(1).normal(size=(6, 6))) >= 0


# ---- shrink23


def shrink_oracle(v, kappa):
    """Grid search at 1e-4 spacing over [min(0,v), max(0,v)], then golden refinement."""
    f = lambda g: kappa * (g - v) ** 2 + np.abs(g) ** (2.0 / 3.0)  # noqa: E731
    lo, hi = min(0.0, v), max(0.0, v)
    grid = np.append(np.arange(lo, hi, 1e-4), hi)
    k = int(np.argmin(f(grid)))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    phi = (np.sqrt(5) - 1) / 2
    for _ in range(60):
        c, d = b - phi * (b - a), a + phi * (b - a)
        if f(c) < f(d):
            b = d
        else:
            a = c
    best = 0.5 * (a + b)
    return best if f(best) < f(0.0) else 0.0


def test_shrink23_matches_grid_oracle():
    r = np.random.default_rng(2024)
    vs = r.uniform(-6, 6, 1000)
    ks = np.exp(r.uniform(np.log(0.05), np.log(20), 1000))
    got = shrink23(vs, ks)
    want = np.array([shrink_oracle(v, k) for v, k in zip(vs, ks)])
    assert np.max(np.abs(got - want)) <= 1e-3


def test_shrink23_zero_input():
    for k in (1e-3, 1.0, 1e3):
        assert shrink23(0.0, k) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(1e-4, 1e4))
def test_shrink23_shrinks(v, kappa):
    g = shrink23(v, kappa)
    assert abs(g) <= abs(v) + 1e-12
    assert g == 0 or np.sign(g) == np.sign(v)


def test_shrink23_rejects_bad_kappa():
    with pytest.raises(ValueError):
        shrink23(1.0, 0.0)


def test_shrink23_returns_float_for_scalar():
    assert isinstance(shrink23(3.0, 1.0), float)


# ---- u-step and solve_u


@pytest.mark.parametrize("seed", range(5))
def test_quadratic_u_step_matches_dense_solve(seed):
    r = np.random.default_rng(seed)
    n = 8
    target = r.normal(size=(n, n))
    field = GradientField(*r.normal(size=(2, n, n)))
    mu1, rho = 0.7, 1.9
    # Dense periodic forward-difference matrices.
    shift = np.roll(np.eye(n), 1, axis=1)  # (S x)[j] = x[j+1]
    d1 = shift - np.eye(n)
    eye = np.eye(n)
    dx = np.kron(eye, d1)  # along columns (raster order)
    dy = np.kron(d1, eye)
    a = mu1 * np.eye(n * n) + rho * (dx.T @ dx + dy.T @ dy)
    rhs = mu1 * target.ravel() + rho * (dx.T @ field.gx.ravel() + dy.T @ field.gy.ravel())
    want = np.linalg.solve(a, rhs).reshape(n, n)
    got = quadratic_u_step(target, field, mu1, rho)
    assert np.max(np.abs(got - want)) <= 1e-8


def test_laplacian_symbol_zero_mode():
    sym = _laplacian_symbol((4, 6))
    assert sym[0, 0] == 0 and np.all(sym >= 0)


def test_solve_u_vanishing_prior(rng):
    t = rng.uniform(0, 255, (16, 16))
    np.testing.assert_allclose(solve_u(t, 1e-12, 1.0), t, atol=1e-6)


def test_solve_u_constant_fixed_point():
    t = np.full((12, 12), 42.0)
    np.testing.assert_allclose(solve_u(t, 3.0, 0.5), t, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_solve_u_never_worse_than_target(seed):
    r = np.random.default_rng(seed)
    t = r.uniform(0, 255, (20, 20))
    for lam, mu1 in ((1.0, 1.0), (50.0, 0.1), (0.01, 10.0)):
        u = solve_u(t, lam, mu1)
        assert u_objective(u, t, lam, mu1) <= u_objective(t, t, lam, mu1)


def test_solve_u_local_optimality_probe():
    r = np.random.default_rng(99)
    t = r.normal(0, 3, (16, 16))
    u = solve_u(t, 1.0, 1.0)
    base = u_objective(u, t, 1.0, 1.0)
    worse = 0
    for _ in range(10_000):
        p = u + r.uniform(-0.5, 0.5, u.shape)
        worse += u_objective(p, t, 1.0, 1.0) >= base
    assert worse == 10_000


def test_solve_u_validation():
    with pytest.raises(ValueError):
        solve_u(np.zeros((4, 4)), 0.0, 1.0)
    with pytest.raises(ValueError):
        solve_u(np.zeros((4, 4)), 1.0, 1.0, iters=0)
