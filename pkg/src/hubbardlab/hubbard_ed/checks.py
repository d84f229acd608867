"""Numerical checks of two auxiliary inequalities.

``lt_check``: the nearest-neighbour Lieb-Thirring type bound for two
antisymmetric particles on a periodic box.

``trace_bound_check``: the perturbative trace inequality relating ``Tr[γw]`` to
its value at a projection ``ξ``, on random finite-dimensional instances.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from .basis import SpeciesBasis
from .hamiltonian import hopping_matrix, neighbor_array

LT_CONSTANT = 2.0 ** 5.5 / (15.0 * math.pi ** 2)


def radial_profile(f_spec: dict):
    """``f(r)`` from a spec ``{"kind": "step"|"exp"|"zero", "c": .., "radius"|"length": ..}``."""
    kind = f_spec.get("kind", "step")
    c = float(f_spec.get("c", 0.0))
    if c < 0:
        raise ValueError("f must be nonnegative")
    if kind == "zero":
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    if kind == "step":
        radius = float(f_spec["radius"])
        return lambda r: np.where(np.asarray(r) <= radius + 1e-12, c, 0.0)
    if kind == "exp":
        length = float(f_spec["length"])
        return lambda r: c * np.exp(-np.asarray(r, dtype=float) / length)
    raise ValueError(f"unknown profile kind {kind!r}")


def _torus_distance(a: np.ndarray, b: np.ndarray, L: int) -> np.ndarray:
    d = np.abs(a - b) % L
    d = np.minimum(d, L - d)
    return np.sqrt(np.sum(d.astype(float) ** 2, axis=-1))


@dataclass(frozen=True)
class LTReport:
    L: int
    f_spec: dict
    min_eig: float
    bound: float
    slack: float
    holds: bool


def lt_check(L: int, f_spec: dict, tol: float = 1e-9) -> LTReport:
    """Lowest eigenvalue of ``Σ_i(-Δ_i - f(D_i))`` for two fermions on the periodic box ``L^3``.

    The bound uses the box sum of ``f(|x|)^{5/2}`` with minimum-image
    distances, the periodic counterpart of the sum over ``Z^3``.
    """
    if L < 3:
        raise ValueError("L must be at least 3")
    f = radial_profile(f_spec)
    r = range(L)
    sites = np.array(list(itertools.product(r, r, r)), dtype=np.int64)
    species = SpeciesBasis.build(len(sites), 2)
    T = hopping_matrix(species, neighbor_array(sites, period=L))
    st = species.states
    d = _torus_distance(sites[st[:, 0]], sites[st[:, 1]], L)
    # for two particles each one's nearest neighbour is the other
    diag = 12.0 - 2.0 * f(d)
    H = (T + sparse.diags(diag)).tocsr()
    # shift to a positive operator so ARPACK's smallest-algebraic search is well posed
    shift = 1.0 + 2.0 * float(np.max(f(d), initial=0.0))
    v0 = np.ones(H.shape[0]) + 0.1 * np.random.default_rng(0).random(H.shape[0])
    val = eigsh(H + shift * sparse.identity(H.shape[0]), k=1, which="SA", v0=v0, tol=tol)[0]
    min_eig = float(val[0] - shift)
    d0 = _torus_distance(sites, np.zeros(3, dtype=np.int64), L)
    bound = -LT_CONSTANT * 2 * float(np.sum(f(d0) ** 2.5))
    slack = min_eig - bound
    return LTReport(L, dict(f_spec), min_eig, bound, slack, bool(slack >= -tol))


LT_GRID = tuple(
    [{"kind": "step", "c": c, "radius": rad} for c in (0.25, 1.0, 4.0) for rad in (1.0, 2.0)]
    + [{"kind": "exp", "c": c, "length": ell} for c in (0.25, 1.0, 4.0) for ell in (0.5, 1.0)]
)


def _random_psd(rng, n, rank=None):
    k = n if rank is None else rank
    A = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return A @ A.conj().T / k


def _random_unitary(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _tr(a, b) -> float:
    return float(np.real(np.sum(a * b.T)))


def trace_bound_terms(gamma, xi, w_plus, w_minus, delta):
    """Both sides of the trace inequality; returns ``(lhs, rhs)``."""
    one = np.eye(gamma.shape[0])
    w = w_plus - w_minus
    norm = lambda m: float(np.linalg.norm(m, 2))
    lhs = _tr(gamma, w)
    rhs = (_tr(xi, w_plus) * (1 - delta) - _tr(xi, w_minus) * (1 + delta)
           - (1 + 1 / delta) * (norm(w_plus) + norm(w_minus)) * _tr(gamma, one - xi)
           - norm(w) * _tr(xi, one - gamma))
    return lhs, rhs


@dataclass(frozen=True)
class TraceReport:
    seed: int
    n_instances: int
    violations: int
    min_slack: float
    min_relative_slack: float


def trace_bound_check(seed: int = 0, n_instances: int = 1000, delta: float | None = None,
                      dims: tuple[int, int] = (4, 16)) -> TraceReport:
    """Random instances with ``0 ≤ γ ≤ 1``, a projection ``ξ`` and ``w = w₊ - w₋``, ``w± ≥ 0``."""
    if delta is not None and not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    violations = 0
    min_slack = min_rel = math.inf
    for _ in range(n_instances):
        n = int(rng.integers(dims[0], dims[1] + 1))
        U = _random_unitary(rng, n)
        gamma = (U * rng.random(n)) @ U.conj().T
        V = _random_unitary(rng, n)
        m = int(rng.integers(0, n + 1))
        xi = V[:, :m] @ V[:, :m].conj().T
        w_plus = _random_psd(rng, n, int(rng.integers(1, n + 1)))
        w_minus = _random_psd(rng, n, int(rng.integers(1, n + 1))) * rng.random()
        d = float(rng.uniform(0.01, 0.99)) if delta is None else delta
        lhs, rhs = trace_bound_terms(gamma, xi, w_plus, w_minus, d)
        scale = max(1.0, abs(lhs), abs(rhs))
        slack = lhs - rhs
        if slack < -1e-12 * scale:
            violations += 1
        min_slack = min(min_slack, slack)
        min_rel = min(min_rel, slack / scale)
    return TraceReport(seed, n_instances, violations, min_slack, min_rel)
