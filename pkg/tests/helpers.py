"""Shared independent oracles and small statistics used across the tests.

Everything here deliberately avoids the library's own computational paths:
fits go through numpy.linalg.lstsq on explicitly built augmented matrices,
derivatives through central finite differences, special functions through
direct series summation.
"""

import math

import numpy as np


def augment(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([X, np.ones((X.shape[0], 1))])


def lstsq_fit(X, y, ridge=0.0):
    """Normal-equations oracle via numpy.linalg.lstsq on the augmented matrix."""
    aug = augment(X)
    if ridge:
        d1 = aug.shape[1]
        aug = np.vstack([aug, np.sqrt(ridge) * np.eye(d1)])
        y = np.concatenate([y, np.zeros(d1)])
    theta, *_ = np.linalg.lstsq(aug, y, rcond=None)
    return theta


def direct_risk(X, y, theta):
    res = y - augment(X) @ theta
    return float(np.sum(res * res) / len(y))


def refit_influence(X, y, j, X_test, y_test, ridge=0.0):
    """Full-refit exact influence oracle: drop row j, refit, difference risks."""
    theta = lstsq_fit(X, y, ridge)
    mask = np.arange(len(y)) != j
    theta_loo = lstsq_fit(X[mask], y[mask], ridge)
    return direct_risk(X_test, y_test, theta_loo) - direct_risk(X_test, y_test, theta)


def central_difference_gradient(f, theta, step=1e-6):
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (f(up) - f(dn)) / (2 * step)
    return grad


def central_difference_scalar(f, x, step=1e-5):
    return (f(x + step) - f(x - step)) / (2 * step)


def tetragamma_series(x, terms=4_000_000):
    """Direct series oracle: psi''(x) = -2 sum_{k>=0} (x + k)^-3."""
    k = np.arange(terms, dtype=float)
    return -2.0 * float(np.sum((x + k) ** -3))


def mann_kendall_z(values):
    """Mann-Kendall trend statistic (normal approximation, no tie correction)."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    s = 0
    for i in range(n - 1):
        s += int(np.sum(np.sign(values[i + 1 :] - values[i])))
    var = n * (n - 1) * (2 * n + 5) / 18.0
    if s > 0:
        return (s - 1) / math.sqrt(var)
    if s < 0:
        return (s + 1) / math.sqrt(var)
    return 0.0


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / len(a)
    cdf_b = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical(n, m, alpha=0.05):
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def random_regression(rng, n, d, noise=0.1):
    theta = rng.normal(size=d + 1)
    X = rng.normal(size=(n, d))
    y = X @ theta[:-1] + theta[-1] + noise * rng.normal(size=n)
    return X, y
