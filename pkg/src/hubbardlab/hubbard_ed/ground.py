"""Ground states, interaction shifts and the per-run result row."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..ideal_fermi import dirichlet_mode, dirichlet_spectrum, free_ground_energy
from ..scattering import scattering_length
from .basis import DEFAULT_DIMENSION_CAP, FockBasis, build_basis
from .hamiltonian import Hamiltonian, build_hamiltonian
from .lanczos import lanczos_ground


def start_vector(basis: FockBasis, seed: int = 0) -> np.ndarray:
    """All-ones vector with a small seeded positive perturbation, normalized on the allowed entries.

    The perturbation keeps the start vector from being orthogonal to the
    ground state when symmetry would otherwise make the plain all-ones vector
    miss it.
    """
    rng = np.random.default_rng(seed)
    v = rng.random(basis.shape)
    v *= 0.1
    v += 1.0
    if basis.mask is not None:
        v[~basis.mask] = 0.0
    v /= np.linalg.norm(v)
    return v


@dataclass
class GroundState:
    E0: float
    residual: float
    vector: np.ndarray = field(repr=False)
    basis: FockBasis = field(repr=False)
    g: float = 0.0
    iterations: int = 0
    tol: float = 1e-8

    @property
    def L(self) -> int:
        return self.basis.L

    @property
    def n_up(self) -> int:
        return self.basis.n_up

    @property
    def n_down(self) -> int:
        return self.basis.n_down

    def amplitude(self, i: int, j: int) -> float:
        return float(self.vector[i, j])


def ground_state(basis: FockBasis, g: float, tol: float = 1e-8, seed: int = 0, max_iter: int = 3000,
                 hamiltonian: Hamiltonian | None = None) -> GroundState:
    H = hamiltonian if hamiltonian is not None else build_hamiltonian(basis, g)
    res = lanczos_ground(H.matvec, start_vector(basis, seed), tol=tol, max_iter=max_iter)
    gs = GroundState(res.value, res.residual, res.vector, basis, g, res.iterations, tol)
    if not math.isinf(g):
        free = free_ground_energy(basis.n_up, basis.n_down, basis.L).energy
        bound = free + g * basis.n_up * basis.n_down
        if gs.E0 > bound + 1e-8 * max(1.0, abs(bound)):
            raise RuntimeError(f"variational bound violated: E0={gs.E0} > {bound}")
    return gs


def two_body_effective_volume(L: int) -> float:
    """``1/Σ_x ψ_0(x)^4`` for the lowest Dirichlet mode, equal to ``(2L/3)^3``.

    At first order in ``g`` the two-body shift is exactly ``g/V_eff``, so this is
    the volume that turns ``ΔE`` into a scattering length in the Dirichlet box.
    """
    psi = dirichlet_mode(L, (1, 1, 1))
    return float(1.0 / np.sum(psi ** 4))


def shell_averaged_density(L: int, N: int) -> np.ndarray:
    """Free Dirichlet density of ``N`` fermions; an open shell is filled uniformly."""
    modes, energies = dirichlet_spectrum(L)
    rho = np.zeros((L - 1,) * 3)
    if N == 0:
        return rho
    level = np.sort(energies)[N - 1]
    below = energies < level - 1e-12
    shell = np.abs(energies - level) <= 1e-12
    frac = (N - below.sum()) / shell.sum()
    for n in modes[below]:
        rho += dirichlet_mode(L, n) ** 2
    for n in modes[shell]:
        rho += frac * dirichlet_mode(L, n) ** 2
    return rho


def dirichlet_overlap_factor(L: int, n_up: int, n_down: int) -> float:
    """``L^3 Σ_x ρ_u(x) ρ_d(x) / (N_u N_d)`` for the free Dirichlet densities.

    At first order in the interaction the shift is ``8πa Σ ρ_u ρ_d`` rather than
    ``8πa N_u N_d / L^3``; this factor is their ratio. It is 27/8 for one
    particle per species at every L, so at fixed N the ED ratio column tends to
    this value (not to 1) as the box grows.
    """
    ru, rd = shell_averaged_density(L, n_up), shell_averaged_density(L, n_down)
    return float(L ** 3 * np.sum(ru * rd) / (n_up * n_down))


def fitted_effective_volume(L: int, g_small: float = 1e-4, tol: float = 1e-10) -> float:
    """``g/ΔE`` from exact diagonalization at small ``g`` (two particles)."""
    basis = build_basis(L, 1, 1)
    e0 = ground_state(basis, g_small, tol=tol).E0
    free = free_ground_energy(1, 1, L).energy
    return g_small / (e0 - free)


@dataclass(frozen=True)
class ShiftRow:
    L: int
    n_up: int
    n_down: int
    g: float
    E0: float
    residual: float
    E0_free: float
    dE: float
    prediction: float
    ratio: float
    V_eff: float = math.nan
    a_extracted: float = math.nan
    flags: tuple = ()
    overlap_factor: float = math.nan


def interaction_shift(L: int, n_up: int, n_down: int, g: float, tol: float = 1e-8, seed: int = 0,
                      state: GroundState | None = None,
                      dimension_cap: int = DEFAULT_DIMENSION_CAP) -> tuple[ShiftRow, GroundState]:
    """``ΔE = E0(g) - E0(0)`` against ``8πa(g)·N_u N_d / L^3``.

    ``E0(0)`` is the exact free Dirichlet energy (sum of the lowest mode
    energies). For two particles the row also carries ``V_eff`` and the
    extracted scattering length ``ΔE·V_eff/(8π)``.
    """
    hardcore = math.isinf(g)
    if state is None:
        basis = build_basis(L, n_up, n_down, hardcore=hardcore, dimension_cap=dimension_cap)
        state = ground_state(basis, g, tol=tol, seed=seed)
    free = free_ground_energy(n_up, n_down, L)
    dE = state.E0 - free.energy
    a = scattering_length(g)
    pred = 8.0 * math.pi * a * n_up * n_down / L ** 3
    flags = []
    if free.degenerate:
        flags.append("free_shell_degenerate")
    if pred == 0.0:
        ratio = math.nan
        flags.append("ratio_undefined")
    else:
        ratio = dE / pred
    v_eff = a_ext = math.nan
    if n_up == 1 and n_down == 1:
        v_eff = two_body_effective_volume(L)
        a_ext = dE * v_eff / (8.0 * math.pi)
    kappa = dirichlet_overlap_factor(L, n_up, n_down) if n_up and n_down else math.nan
    row = ShiftRow(L, n_up, n_down, g, state.E0, state.residual, free.energy, dE, pred, ratio,
                   v_eff, a_ext, tuple(flags), kappa)
    return row, state
