"""Hubbard Hamiltonian on the tensor-product Fock space.

Dirichlet encoding: states live on the interior ``[1, L-1]^3``. Every particle
carries the full diagonal 6 of ``-Δ`` (hops that would leave the box are simply
absent, they do *not* reduce the diagonal), which is exactly the ``Z^3``
quadratic form restricted to interior-supported functions. This differs from
the common "open box" Laplacian whose diagonal counts only present neighbours.

Amplitudes are stored as ``psi[i_up, i_down]``; the matvec is

    (Hψ)[i,j] = (6N_u + 6N_d + g D[i,j]) ψ[i,j] + Σ_k T_u[i,k] ψ[k,j] + Σ_k T_d[j,k] ψ[i,k]

with ``T`` the signed off-diagonal hopping of one species and ``D`` the number
of doubly occupied sites. For ``g = ∞`` the doubly occupied entries are removed
by a mask instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import sparse

from .basis import FockBasis, SpeciesBasis, neighbor_table


@numba.njit(cache=True)
def _rank(occ, binom):
    r = 0
    for i in range(occ.shape[0]):
        r += binom[occ[i], i + 1]
    return r


@numba.njit(cache=True)
def _hop_move(occ, p, b, work):
    """Replace ``occ[p]`` by site ``b``; returns the fermionic sign and writes the sorted result."""
    a = occ[p]
    lo, hi = (a, b) if a < b else (b, a)
    between = 0
    m = 0
    for q in range(occ.shape[0]):
        c = occ[q]
        if q == p:
            continue
        if lo < c < hi:
            between += 1
        work[m] = c
        m += 1
    # insert b into the sorted remainder
    k = m
    while k > 0 and work[k - 1] > b:
        work[k] = work[k - 1]
        k -= 1
    work[k] = b
    return -1.0 if between % 2 else 1.0


@numba.njit(cache=True)
def _hopping_coo(states, nbr, binom):
    n, N = states.shape
    cap = n * N * nbr.shape[1]
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap, dtype=np.float64)
    work = np.empty(N, dtype=np.int64)
    occupied = np.zeros(nbr.shape[0], dtype=np.bool_)
    t = 0
    for k in range(n):
        occ = states[k]
        for q in range(N):
            occupied[occ[q]] = True
        for p in range(N):
            a = occ[p]
            for z in range(nbr.shape[1]):
                b = nbr[a, z]
                if b < 0 or occupied[b]:
                    continue
                sign = _hop_move(occ, p, b, work)
                rows[t] = _rank(work, binom)
                cols[t] = k
                vals[t] = -sign
                t += 1
        for q in range(N):
            occupied[occ[q]] = False
    return rows[:t], cols[:t], vals[:t]


def neighbor_array(sites: np.ndarray, period: int | None = None) -> np.ndarray:
    table = neighbor_table(sites, period)
    out = -np.ones((len(sites), 6), dtype=np.int64)
    for i, nb in enumerate(table):
        out[i, : len(nb)] = nb
    return out


def hopping_matrix(species: SpeciesBasis, nbr: np.ndarray) -> sparse.csr_matrix:
    """Signed off-diagonal part of ``-Σ_i Δ_i`` for one species (entries -sign)."""
    n = species.size
    if species.n_particles == 0:
        return sparse.csr_matrix((n, n))
    rows, cols, vals = _hopping_coo(species.states, nbr, species.binom)
    m = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    m.sort_indices()
    return m


@numba.njit(cache=True)
def _apply(psi, out, up_ptr, up_idx, up_val, dn_ptr, dn_idx, dn_val, diag, docc, g, mask, use_mask):
    nu, nd = psi.shape
    for i in range(nu):
        for j in range(nd):
            out[i, j] = (diag + g * docc[i, j]) * psi[i, j]
        for p in range(up_ptr[i], up_ptr[i + 1]):
            k = up_idx[p]
            v = up_val[p]
            for j in range(nd):
                out[i, j] += v * psi[k, j]
        for j in range(nd):
            acc = 0.0
            for p in range(dn_ptr[j], dn_ptr[j + 1]):
                acc += dn_val[p] * psi[i, dn_idx[p]]
            out[i, j] += acc
        if use_mask:
            for j in range(nd):
                if not mask[i, j]:
                    out[i, j] = 0.0


@dataclass(frozen=True)
class Hamiltonian:
    basis: FockBasis
    g: float
    t_up: sparse.csr_matrix = field(repr=False)
    t_down: sparse.csr_matrix = field(repr=False)

    @property
    def hardcore(self) -> bool:
        return self.basis.hardcore

    @property
    def diagonal(self) -> float:
        return 6.0 * (self.basis.n_up + self.basis.n_down)

    def matvec(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        psi = np.ascontiguousarray(psi, dtype=np.float64).reshape(self.basis.shape)
        if out is None:
            out = np.empty_like(psi)
        b = self.basis
        mask = b.mask if b.mask is not None else np.ones((1, 1), dtype=np.bool_)
        g = 0.0 if self.hardcore else float(self.g)
        _apply(psi, out, self.t_up.indptr, self.t_up.indices, self.t_up.data,
               self.t_down.indptr, self.t_down.indices, self.t_down.data,
               self.diagonal, b.double_occupancy, g, mask, b.mask is not None)
        return out

    def allowed(self) -> np.ndarray:
        """Boolean array of entries that belong to the (possibly constrained) space."""
        if self.basis.mask is None:
            return np.ones(self.basis.shape, dtype=bool)
        return self.basis.mask

    def to_dense(self) -> np.ndarray:
        """Dense matrix on the allowed entries (flattened C order); small bases only."""
        b = self.basis
        if b.up.size * b.down.size > 20000:
            raise ValueError("basis too large for a dense matrix")
        nu, nd = b.shape
        eye_u, eye_d = sparse.identity(nu), sparse.identity(nd)
        H = sparse.kron(self.t_up, eye_d) + sparse.kron(eye_u, self.t_down)
        d = self.diagonal + (0.0 if self.hardcore else self.g) * b.double_occupancy.ravel()
        H = (H + sparse.diags(d)).toarray()
        keep = self.allowed().ravel()
        return H[np.ix_(keep, keep)]


def build_hamiltonian(basis: FockBasis, g: float, period: int | None = None) -> Hamiltonian:
    """Hopping on the interior sites; ``period`` wraps the neighbour table (used by lt_check)."""
    if g < 0:
        raise ValueError("g must be nonnegative")
    if math.isinf(g) and not basis.hardcore:
        raise ValueError("g = inf requires a hard-core basis")
    nbr = neighbor_array(basis.sites, period)
    t_up = hopping_matrix(basis.up, nbr)
    t_down = t_up if basis.down is basis.up else hopping_matrix(basis.down, nbr)
    return Hamiltonian(basis, g, t_up, t_down)


def hamiltonian_matvec(basis: FockBasis, g: float, v: np.ndarray) -> np.ndarray:
    return build_hamiltonian(basis, g).matvec(v)
