"""Lanczos ground-state solver with a certified residual.

Small problems keep the Krylov basis and reorthogonalize fully. Large problems
cannot store the basis (one vector of the L=6, N=2+2 space is ~0.5 GB), so the
recurrence is run twice: the first pass collects the tridiagonal coefficients,
the second regenerates the identical Krylov vectors and accumulates the Ritz
vector. The true residual ``||Hx - θx||`` is then measured; if it is above
tolerance the solver restarts from ``x``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.linalg.blas import daxpy

log = logging.getLogger(__name__)

FULL_REORTH_LIMIT = 100_000


class LanczosError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass
class LanczosResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    restarts: int


def _lowest_ritz(alpha, beta):
    vals, vecs = eigh_tridiagonal(np.asarray(alpha), np.asarray(beta), select="i", select_range=(0, 0))
    return float(vals[0]), vecs[:, 0]


def _small(matvec, v0, tol, max_iter, check_every):
    n = v0.size
    m = min(max_iter, n)
    Q = np.empty((min(m + 1, 64), n))
    Q[0] = v0 / np.linalg.norm(v0)
    alpha, beta = [], []
    theta, s = None, None
    for j in range(m):
        w = matvec(Q[j])
        a = float(Q[j] @ w)
        alpha.append(a)
        w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        b = float(np.linalg.norm(w))
        done = b < 1e-13 * max(1.0, abs(a))
        if (j + 1) % check_every == 0 or done or j == m - 1:
            theta, s = _lowest_ritz(alpha, beta)
            if done or abs(b * s[-1]) < 0.1 * tol * max(1.0, abs(theta)):
                break
        beta.append(b)
        if j + 1 >= Q.shape[0]:
            grown = np.empty((min(2 * Q.shape[0], m + 1), n))
            grown[: Q.shape[0]] = Q
            Q = grown
        Q[j + 1] = w / b
    k = len(alpha)
    x = Q[:k].T @ s
    return theta, x, k


def _two_pass(matvec, v0, tol, max_iter, check_every):
    def recurrence(coeffs=None, steps=None):
        q_prev = np.zeros_like(v0)
        q = v0 / np.linalg.norm(v0)
        x = np.zeros_like(v0) if coeffs is not None else None
        alpha, beta = [], []
        b_prev = 0.0
        theta = s = None
        for j in range(steps if steps is not None else max_iter):
            if x is not None:
                daxpy(q, x, a=coeffs[j])
                if j == steps - 1:
                    break
            w = matvec(q)
            if b_prev:
                daxpy(q_prev, w, a=-b_prev)
            a = float(q @ w)
            daxpy(q, w, a=-a)
            b = float(np.linalg.norm(w))
            alpha.append(a)
            if coeffs is None:
                done = b < 1e-13 * max(1.0, abs(a))
                if (j + 1) % check_every == 0 or done:
                    theta, s = _lowest_ritz(alpha, beta)
                    if done or abs(b * s[-1]) < 0.1 * tol * max(1.0, abs(theta)):
                        return theta, s, len(alpha)
            beta.append(b)
            w /= b
            q_prev, q = q, w
            b_prev = b
        if coeffs is not None:
            return x
        theta, s = _lowest_ritz(alpha, beta[: len(alpha) - 1])
        return theta, s, len(alpha)

    theta, s, k = recurrence()
    x = recurrence(coeffs=s, steps=k)
    return theta, x, k


def lanczos_ground(
    matvec: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 2000,
    max_restarts: int = 20,
    check_every: int = 5,
    full_reorth_limit: int = FULL_REORTH_LIMIT,
) -> LanczosResult:
    """Lowest eigenpair of the symmetric operator ``matvec``.

    Converged means ``||Hx - θx|| ≤ tol·max(1, |θ|)`` for the normalized ``x``.
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    v = np.array(v0, dtype=np.float64).ravel()
    shape = np.shape(v0)
    mv = lambda x: np.asarray(matvec(x.reshape(shape)), dtype=np.float64).ravel()
    best = np.inf
    iters = 0
    for restart in range(max_restarts + 1):
        if v.size <= full_reorth_limit:
            theta, x, k = _small(mv, v, tol, max_iter, check_every)
        else:
            theta, x, k = _two_pass(mv, v, tol, max_iter, check_every)
        iters += k
        x /= np.linalg.norm(x)
        hx = mv(x)
        theta = float(x @ hx)
        res = float(np.linalg.norm(hx - theta * x))
        del hx
        best = min(best, res)
        log.debug("lanczos restart %d: %d steps, theta=%.14f residual=%.3e", restart, k, theta, res)
        if res <= tol * max(1.0, abs(theta)):
            return LanczosResult(theta, x.reshape(shape), res, iters, restart)
        v = x
    raise LanczosError("Lanczos did not converge", best)
