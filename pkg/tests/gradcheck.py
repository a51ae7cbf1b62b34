"""Central-difference gradient checking shared by the test modules."""

import numpy as np

from rumigan import tensor as T
from rumigan.tensor import Tape, Tensor


def numeric_grad(f, arrays, i, h=1e-6):
    base = [a.copy() for a in arrays]
    x = base[i]
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        step = h * max(1.0, abs(old))
        x[idx] = old + step
        up = f(*[Tensor(a) for a in base]).item()
        x[idx] = old - step
        down = f(*[Tensor(a) for a in base]).item()
        x[idx] = old
        g[idx] = (up - down) / (2 * step)
    return g


def analytic_grads(f, arrays):
    tape = Tape()
    with tape:
        xs = [tape.watch(Tensor(a)) for a in arrays]
        out = f(*xs)
    return [g.data for g in tape.gradient(out, xs)]


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-8))


def max_rel_error(f, arrays):
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    got = analytic_grads(f, arrays)
    return max(rel_err(g, numeric_grad(f, arrays, i)) for i, g in enumerate(got))


def weighted(op, shape, seed=0):
    """Scalarize ``op`` with fixed random weights so every output entry matters."""
    w = np.random.default_rng(seed).normal(size=shape)
    return lambda *xs: T.sum(T.mul(op(*xs), w))
