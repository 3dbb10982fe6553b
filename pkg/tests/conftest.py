import numpy as np
import pytest

from ewca import (
    CostMatrix,
    DataMatrix,
    TransportPlan,
    qf,
    sinkhorn_knopp,
    uniform_histogram,
)


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def random_stiefel(d: int, k: int, rng: np.random.Generator):
    return qf(rng.standard_normal((d, k)))


def random_uniform_plan(n: int, rng: np.random.Generator, epsilon: float = 1.0) -> TransportPlan:
    """A generic coupling with uniform marginals, produced by Sinkhorn on a
    random cost so the marginal constraints hold to 1e-13."""
    points = DataMatrix(rng.standard_normal((3, n)))
    cost = CostMatrix(
        np.maximum(
            (points.values**2).sum(0)[:, None]
            + (points.values**2).sum(0)[None, :]
            - 2 * points.values.T @ points.values,
            0.0,
        )
    )
    marginal = uniform_histogram(n)
    plan, _ = sinkhorn_knopp(cost, marginal, marginal, epsilon, tol=1e-13, max_iter=50000)
    return plan


@pytest.fixture
def rng():
    return rng_for(314159)
