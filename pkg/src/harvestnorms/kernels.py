"""Hot numeric kernels behind the Q-learner, in two interchangeable backends.

The default backend jit-compiles the kernels with numba; a pure-numpy
fallback implements the same contracts. Select explicitly with

    HARVESTNORMS_BACKEND=numpy | numba

If the variable is unset, numba is used when it imports, numpy otherwise.
All kernels take float64 arrays; the two SGD train kernels update the online
parameters in place and return the mean Huber loss of the batch.
"""

from __future__ import annotations

import os

import numpy as np

from .config import ConfigError

_BACKEND_ENV = "HARVESTNORMS_BACKEND"


# ---------------------------------------------------------------------------
# numpy backend: vectorised
# ---------------------------------------------------------------------------

def _forward_numpy(x, w1, b1, w2, b2, w3, b3):
    h1 = np.maximum(x @ w1 + b1, 0.0)
    h2 = np.maximum(h1 @ w2 + b2, 0.0)
    return h2 @ w3 + b3


def _backward_numpy(w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
                    xs, acts, rewards, next_xs, dones, gamma, delta):
    n = xs.shape[0]
    tq = _forward_numpy(next_xs, tw1, tb1, tw2, tb2, tw3, tb3)
    targets = rewards + gamma * tq.max(axis=1) * (1.0 - dones)

    z1 = xs @ w1 + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w2 + b2
    h2 = np.maximum(z2, 0.0)
    q = h2 @ w3 + b3

    rows = np.arange(n)
    resid = q[rows, acts] - targets
    absres = np.abs(resid)
    loss = np.mean(np.where(absres <= delta, 0.5 * resid * resid, delta * (absres - 0.5 * delta)))

    dq = np.zeros_like(q)
    dq[rows, acts] = np.clip(resid, -delta, delta) / n
    dw3 = h2.T @ dq
    db3 = dq.sum(axis=0)
    dz2 = (dq @ w3.T) * (z2 > 0.0)
    dw2 = h1.T @ dz2
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ w2.T) * (z1 > 0.0)
    dw1 = xs.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, dw1, db1, dw2, db2, dw3, db3


def _train_grads_numpy(w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
                       xs, acts, rewards, next_xs, dones, gamma, delta):
    return _backward_numpy(w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
                           xs, acts, rewards, next_xs, dones, gamma, delta)


def _train_step_sgd_numpy(w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
                          xs, acts, rewards, next_xs, dones, gamma, alpha, delta):
    loss, dw1, db1, dw2, db2, dw3, db3 = _backward_numpy(
        w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
        xs, acts, rewards, next_xs, dones, gamma, delta)
    w1 -= alpha * dw1
    b1 -= alpha * db1
    w2 -= alpha * dw2
    b2 -= alpha * db2
    w3 -= alpha * dw3
    b3 -= alpha * db3
    return loss


# ---------------------------------------------------------------------------
# numba backend: same math, loop form where numba lacks the numpy idiom
# ---------------------------------------------------------------------------

def _forward_core(x, w1, b1, w2, b2, w3, b3):
    h1 = np.maximum(x @ w1 + b1, 0.0)
    h2 = np.maximum(h1 @ w2 + b2, 0.0)
    return h2 @ w3 + b3


def _backward_core(w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
                   xs, acts, rewards, next_xs, dones, gamma, delta):
    n = xs.shape[0]
    th1 = np.maximum(next_xs @ tw1 + tb1, 0.0)
    th2 = np.maximum(th1 @ tw2 + tb2, 0.0)
    tq = th2 @ tw3 + tb3

    z1 = xs @ w1 + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w2 + b2
    h2 = np.maximum(z2, 0.0)
    q = h2 @ w3 + b3

    dq = np.zeros_like(q)
    loss = 0.0
    for i in range(n):
        row_max = tq[i, 0]
        for j in range(1, tq.shape[1]):
            if tq[i, j] > row_max:
                row_max = tq[i, j]
        target = rewards[i] + gamma * row_max * (1.0 - dones[i])
        resid = q[i, acts[i]] - target
        absres = abs(resid)
        if absres <= delta:
            loss += 0.5 * resid * resid
            dq[i, acts[i]] = resid / n
        else:
            loss += delta * (absres - 0.5 * delta)
            dq[i, acts[i]] = (delta if resid > 0.0 else -delta) / n
    loss /= n

    dw3 = h2.T @ dq
    db3 = dq.sum(axis=0)
    dz2 = (dq @ w3.T) * (z2 > 0.0)
    dw2 = h1.T @ dz2
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ w2.T) * (z1 > 0.0)
    dw1 = xs.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, dw1, db1, dw2, db2, dw3, db3


def _make_train_step_sgd(backward):
    def train_step_sgd(w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
                       xs, acts, rewards, next_xs, dones, gamma, alpha, delta):
        loss, dw1, db1, dw2, db2, dw3, db3 = backward(
            w1, b1, w2, b2, w3, b3, tw1, tb1, tw2, tb2, tw3, tb3,
            xs, acts, rewards, next_xs, dones, gamma, delta)
        w1 -= alpha * dw1
        b1 -= alpha * db1
        w2 -= alpha * dw2
        b2 -= alpha * db2
        w3 -= alpha * dw3
        b3 -= alpha * db3
        return loss
    return train_step_sgd


def _build_numba():
    from numba import njit

    forward = njit(cache=True)(_forward_core)
    backward = njit(cache=True)(_backward_core)
    train_step_sgd = njit(cache=True)(_make_train_step_sgd(backward))
    return {"forward": forward, "train_grads": backward, "train_step_sgd": train_step_sgd}


_NUMPY_IMPL = {
    "forward": _forward_numpy,
    "train_grads": _train_grads_numpy,
    "train_step_sgd": _train_step_sgd_numpy,
}


def available_backends() -> tuple[str, ...]:
    try:
        import numba  # noqa: F401
        return ("numba", "numpy")
    except ImportError:
        return ("numpy",)


def _select_backend() -> str:
    choice = os.environ.get(_BACKEND_ENV, "").strip().lower()
    if choice and choice not in ("numba", "numpy"):
        raise ConfigError(f"{_BACKEND_ENV} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    if "numba" in available_backends():
        return "numba"
    if choice == "numba":
        raise ConfigError("numba backend requested but numba is not installed")
    return "numpy"


def get_impl(backend: str) -> dict:
    if backend == "numpy":
        return _NUMPY_IMPL
    if backend == "numba":
        return _build_numba()
    raise ConfigError(f"unknown backend {backend!r}")


BACKEND = _select_backend()
_impl = get_impl(BACKEND)
forward = _impl["forward"]
train_grads = _impl["train_grads"]
train_step_sgd = _impl["train_step_sgd"]
