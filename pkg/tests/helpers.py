"""Shared random-instance builders for the test modules."""
import numpy as np

ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Log one acceptance line; the terminal summary replays them in order."""
    line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def random_counts(rng, shape, mean=3.0, zero_frac=0.0):
    D = rng.poisson(mean, size=shape).astype(float)
    if zero_frac:
        D[rng.random(shape) < zero_frac] = 0.0
    return D


def random_instance(rng, M, K, N_X, N_Y, counts=False, low=0.2):
    """Random data plus strictly positive factors for unit tests."""
    from bcnmf.core import FactorModel

    model = FactorModel(
        rng.uniform(low, 1.5, (M, K)),
        rng.uniform(low, 1.5, (K, N_X)),
        rng.uniform(low, 1.5, (K, N_Y)),
    )
    if counts:
        X = random_counts(rng, (M, N_X), zero_frac=0.2)
        Y = random_counts(rng, (M, N_Y), zero_frac=0.2)
    else:
        X = rng.uniform(0, 2, (M, N_X))
        Y = rng.uniform(0, 2, (M, N_Y))
    return X, Y, model
