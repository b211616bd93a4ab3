import numpy as np
import pytest

from ghnet.optim import armijo_backtrack, bfgs_minimize


def quadratic():
    # f(x) = 0.5 x'Ax - b'x, minimizer A^-1 b = (1, -2) by construction
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    x_star = np.array([1.0, -2.0])
    b = A @ x_star
    return (lambda x: 0.5 * x @ A @ x - b @ x), (lambda x: A @ x - b), x_star


def test_quadratic_converges_within_ten_iterations():
    f, g, x_star = quadratic()
    res = bfgs_minimize(f, g, np.array([5.0, 5.0]), maxiter=10, gtol=1e-12)
    assert res.iterations <= 10
    np.testing.assert_allclose(res.x, x_star, atol=1e-8)


def test_history_non_increasing():
    f, g, _ = quadratic()
    res = bfgs_minimize(f, g, np.array([-40.0, 13.0]), maxiter=10)
    hist = [f(np.array([-40.0, 13.0]))] + res.history
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_rosenbrock():
    def f(x):
        return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

    def g(x):
        return np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])

    res = bfgs_minimize(f, g, np.array([-1.2, 1.0]), maxiter=500, gtol=1e-10)
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_zero_gradient_start_returns_immediately():
    f, g, x_star = quadratic()
    res = bfgs_minimize(f, g, x_star.copy(), maxiter=10)
    assert res.iterations == 0 and res.status == "converged"
    np.testing.assert_array_equal(res.x, x_star)


def test_line_search_failure_stops_cleanly():
    # gradient lies about the slope, so no step can satisfy Armijo
    res = bfgs_minimize(lambda x: float(x @ x), lambda x: -np.ones_like(x), np.zeros(2), maxiter=5)
    assert res.status == "linesearch" and res.iterations == 0
    np.testing.assert_array_equal(res.x, np.zeros(2))


def test_armijo_backtrack_accepts_sufficient_decrease():
    f = lambda x: float(x @ x)  # noqa: E731
    x = np.array([1.0])
    step, fn = armijo_backtrack(f, x, 1.0, np.array([2.0]), np.array([-2.0]), c=1e-4, shrink=0.5)
    assert step == 0.5 and fn == 0.0


def test_invalid_constants():
    f, g, _ = quadratic()
    with pytest.raises(ValueError):
        bfgs_minimize(f, g, np.zeros(2), 3, c=0.0)
