"""Observables of an ED ground state: density matrices, Fermi-sea defect, close pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from ..ideal_fermi import dirichlet_fermi_sea, dirichlet_mode
from .basis import FockBasis
from .hamiltonian import _hop_move, _rank


@numba.njit(cache=True)
def _opdm(psi, states, binom, n_sites):
    """``γ[a, b] = <c†_a c_b>`` for the species indexing the rows of ``psi``."""
    n, N = states.shape
    gamma = np.zeros((n_sites, n_sites))
    occupied = np.zeros(n_sites, dtype=np.bool_)
    work = np.empty(N, dtype=np.int64)
    for k in range(n):
        occ = states[k]
        for q in range(N):
            occupied[occ[q]] = True
        row_k = psi[k]
        nk = 0.0
        for j in range(row_k.shape[0]):
            nk += row_k[j] * row_k[j]
        for p in range(N):
            b = occ[p]
            gamma[b, b] += nk
            for a in range(n_sites):
                if occupied[a]:
                    continue
                sign = _hop_move(occ, p, a, work)
                i = _rank(work, binom)
                row_i = psi[i]
                acc = 0.0
                for j in range(row_k.shape[0]):
                    acc += row_i[j] * row_k[j]
                gamma[a, b] += sign * acc
        for q in range(N):
            occupied[occ[q]] = False
    return gamma


def _lex_index(basis: FockBasis) -> np.ndarray:
    """Position of each basis site in the lexicographic interior order."""
    m = basis.L - 1
    s = basis.sites - 1
    return (s[:, 0] * m + s[:, 1]) * m + s[:, 2]


def fermi_sea_projection(basis: FockBasis, n_particles: int) -> np.ndarray:
    """``ξ`` on the interior sites (basis order): whole Dirichlet shells up to the N-th level."""
    modes = dirichlet_fermi_sea(n_particles, basis.L)
    if len(modes) == 0:
        return np.zeros((basis.n_sites, basis.n_sites))
    phi = np.stack([dirichlet_mode(basis.L, n).ravel() for n in modes], axis=1)
    phi = phi[_lex_index(basis)]
    return phi @ phi.T


@dataclass(frozen=True)
class DensityMatrix:
    gamma: np.ndarray = field(repr=False)
    trace: float = 0.0
    eig_min: float = 0.0
    eig_max: float = 0.0
    defect: float = 0.0


def one_particle_dm(state, spin: str = "up") -> DensityMatrix:
    """Reduced density matrix of one species and its defect ``Tr[γ(1-ξ)]``.

    ``ξ`` projects onto the Dirichlet modes of all shells up to the ``N``-th
    level, which is the Fermi sea of the Dirichlet box (see module docs).
    """
    basis = state.basis
    psi = state.vector
    if spin == "up":
        species, n = basis.up, basis.n_up
    elif spin == "down":
        species, n = basis.down, basis.n_down
        psi = np.ascontiguousarray(psi.T)
    else:
        raise ValueError("spin must be 'up' or 'down'")
    norm2 = float(np.sum(psi * psi))
    if n == 0:
        g = np.zeros((basis.n_sites, basis.n_sites))
    else:
        g = _opdm(np.ascontiguousarray(psi), species.states, species.binom, basis.n_sites) / norm2
    g = 0.5 * (g + g.T)
    ev = np.linalg.eigvalsh(g)
    xi = fermi_sea_projection(basis, n)
    defect = float(np.trace(g) - np.sum(g * xi))
    return DensityMatrix(g, float(np.trace(g)), float(ev[0]), float(ev[-1]), defect)


def _nearest_distances(coords: np.ndarray) -> np.ndarray:
    """Distance of each particle to its nearest neighbour, per configuration ``(n, N, 3)``."""
    diff = coords[:, :, None, :] - coords[:, None, :, :]
    d = np.sqrt(np.sum(diff.astype(float) ** 2, axis=-1))
    n = coords.shape[1]
    d[:, np.arange(n), np.arange(n)] = np.inf
    return d.min(axis=2)


def close_pair_count(state, R_list: Sequence[int]) -> dict[int, float]:
    """``<I_R>``: expected number of down particles within ``2√3R`` of another down particle."""
    basis = state.basis
    if basis.n_down < 1:
        raise ValueError("need at least one down particle")
    if basis.n_down == 1:
        return {R: 0.0 for R in R_list}
    weights = np.sum(state.vector ** 2, axis=0)
    weights = weights / weights.sum()
    coords = basis.sites[basis.down.states]
    nearest = _nearest_distances(coords)
    out = {}
    for R in R_list:
        # "≤ 2√3R" exactly; the slack only absorbs rounding of sqrt
        close = np.sum(nearest <= 2.0 * math.sqrt(3.0) * R + 1e-9, axis=1)
        out[R] = float(weights @ close)
    return out


def close_pair_shape(R: int, N: int, rho: float) -> float:
    """``N ((R+1)^3 ρ)^{2/5}``, the form of the close-pair bound (constant not included)."""
    return N * ((R + 1) ** 3 * rho) ** 0.4


def double_occupancy(state) -> float:
    v = state.vector
    return float(np.sum(v * v * state.basis.double_occupancy) / np.sum(v * v))


@dataclass(frozen=True)
class ObservableSet:
    gamma_u: DensityMatrix
    gamma_d: DensityMatrix
    i_r: dict
    double_occupancy: float

    @property
    def defect_u(self) -> float:
        return self.gamma_u.defect

    @property
    def defect_d(self) -> float:
        return self.gamma_d.defect


def observables(state, R_list: Sequence[int] = (1, 2)) -> ObservableSet:
    gu = one_particle_dm(state, "up")
    gd = one_particle_dm(state, "down")
    ir = close_pair_count(state, R_list) if state.basis.n_down >= 1 else {R: 0.0 for R in R_list}
    return ObservableSet(gu, gd, ir, double_occupancy(state))


ED_CSV_HEADER = ("L,N_u,N_d,g,E0,residual,E0_free,dE,pred_8pi_a_NuNd_over_V,ratio,"
                 "defect_u,defect_d,IR_1,IR_2,docc")


def ed_result_row(row, state, R_list: Sequence[int] = (1, 2)) -> dict:
    """One CSV record combining an interaction-shift row with the observables of its state."""
    obs = observables(state, R_list) if state.basis.n_down >= 1 else None
    out = {
        "L": row.L, "N_u": row.n_up, "N_d": row.n_down, "g": row.g, "E0": row.E0,
        "residual": row.residual, "E0_free": row.E0_free, "dE": row.dE,
        "pred_8pi_a_NuNd_over_V": row.prediction, "ratio": row.ratio,
        "defect_u": obs.defect_u if obs else one_particle_dm(state, "up").defect,
        "defect_d": obs.defect_d if obs else 0.0,
    }
    for k, R in enumerate(R_list[:2], start=1):
        out[f"IR_{k}"] = obs.i_r[R] if obs else 0.0
    out["docc"] = obs.double_occupancy if obs else 0.0
    return out
