"""Independent optimization oracles used only by the tests.

Deliberately reimplements the sum-rate problem from first principles
(projected gradient ascent with an exact Euclidean simplex projection) so it
shares no code with the package's water-filling path.
"""
import numpy as np

LOG2 = np.log(2.0)


def simplex_project(v: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection of each row of v onto {p >= 0, sum p = budget}."""
    v = np.atleast_2d(v)
    n, m = v.shape
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - budget
    ks = np.arange(1, m + 1)
    cond = (u - css / ks) > 0.0
    rho = cond.cumsum(axis=1).argmax(axis=1)
    theta = css[np.arange(n), rho] / (rho + 1.0)
    return np.maximum(v - theta[:, None], 0.0)


def pga_waterfill(gains: np.ndarray, noise: float, budget: float,
                  iterations: int = 100_000, step: float = 0.005) -> np.ndarray:
    """Maximize the sum rate by projected gradient ascent, rowwise."""
    gains = np.atleast_2d(gains)
    n, m = gains.shape
    p = np.full((n, m), budget / m)
    for _ in range(iterations):
        grad = gains / ((noise + gains * p) * LOG2)
        p = simplex_project(p + step * grad, budget)
    return p


def sum_rate_ref(gains: np.ndarray, powers: np.ndarray, noise: float) -> np.ndarray:
    return np.log2(1.0 + gains * powers / noise).sum(axis=-1)


def random_feasible(n: int, m: int, budget: float, rng: np.random.Generator) -> np.ndarray:
    """n uniform-random points of the power simplex (flat Dirichlet)."""
    return budget * rng.dirichlet(np.ones(m), size=n)
