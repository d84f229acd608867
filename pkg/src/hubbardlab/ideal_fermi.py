"""Ideal lattice Fermi gas: equation of state, finite-box modes, Fermi-sea projections."""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .lattice_core import dispersion

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


# ---------------------------------------------------------------------------
# equation of state
#
# With e(t) = 2(1 - cos t), the set {p3 ∈ [0, π] : e(p3) ≤ s} is [0, q(s)] with
# q(s) = arccos(1 - s/2) clipped to [0, π], and ∫_0^q e = 2q - 2 sin q. The
# remaining (p1, p2) integral over [0, π]^2 is done by nested adaptive quadrature
# with breakpoints at the kinks s = 0 and s = 4.


def _q(s: float) -> float:
    if s <= 0.0:
        return 0.0
    if s >= 4.0:
        return math.pi
    return math.acos(1.0 - 0.5 * s)


def _e1(t: float) -> float:
    return 2.0 * (1.0 - math.cos(t))


def _inner(energy: float, p1: float, weight_energy: bool) -> tuple[float, float]:
    rest = energy - _e1(p1)
    upper = _q(rest)
    if upper <= 0.0:
        return 0.0, 0.0
    points = [_q(rest - 4.0)] if 0.0 < rest - 4.0 < 4.0 else None

    def f(p2):
        s = rest - _e1(p2)
        q = _q(s)
        if not weight_energy:
            return q
        return (energy - s) * q + 2.0 * q - 2.0 * math.sin(q)

    return integrate.quad(f, 0.0, upper, points=points, **_QUAD)


def _outer(energy: float, weight_energy: bool) -> tuple[float, float]:
    upper = _q(energy)
    if upper <= 0.0:
        return 0.0, 0.0
    # kinks in p1 where energy - e(p1) crosses 0, 4 or 8
    kinks = sorted({_q(energy - c) for c in (4.0, 8.0) if 0.0 < energy - c < 4.0})
    errs = []

    def g(p1):
        v, e = _inner(energy, p1, weight_energy)
        errs.append(e)
        return v

    val, err = integrate.quad(g, 0.0, upper, points=kinks or None, **_QUAD)
    return val / math.pi ** 3, (err + upper * max(errs, default=0.0)) / math.pi ** 3


def occupied_volume(energy: float) -> float:
    """``(2π)^-3 |{p : E(p) ≤ energy}|``, the density filled up to ``energy``."""
    if energy <= 0.0:
        return 0.0
    if energy >= 12.0:
        return 1.0
    return _outer(energy, False)[0]


def occupied_energy(energy: float) -> tuple[float, float]:
    """``(2π)^-3 ∫_{E(p) ≤ energy} E(p) dp`` and an error estimate."""
    if energy <= 0.0:
        return 0.0, 0.0
    if energy >= 12.0:
        return 6.0, 0.0
    return _outer(energy, True)


@lru_cache(maxsize=512)
def fermi_energy(rho: float, tol: float = 1e-10) -> float:
    """Solve ``occupied_volume(E_f) = rho`` by bracketing root search."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    if rho == 0.0:
        return 0.0
    if rho == 1.0:
        return 12.0
    return optimize.brentq(lambda e: occupied_volume(e) - rho, 0.0, 12.0, xtol=tol, rtol=4 * np.finfo(float).eps)


def energy_density(rho: float) -> tuple[float, float]:
    """Ground-state energy per site ``e(ρ)`` of spinless lattice fermions, with error estimate."""
    return occupied_energy(fermi_energy(rho))


def e0(rho_u: float, rho_d: float) -> float:
    return energy_density(rho_u)[0] + energy_density(rho_d)[0]


def continuum_energy_density(rho: float) -> float:
    """Leading small-density term ``(3/5)(6π²)^{2/3} ρ^{5/3}``."""
    return 0.6 * (6.0 * math.pi ** 2) ** (2.0 / 3.0) * rho ** (5.0 / 3.0)


@dataclass(frozen=True)
class EosPoint:
    rho: float
    fermi_energy: float
    energy_density: float
    err: float


def eos_point(rho: float) -> EosPoint:
    ef = fermi_energy(rho)
    e, err = occupied_energy(ef)
    return EosPoint(rho, ef, e, err)


def eos_csv(points) -> str:
    buf = io.StringIO()
    buf.write("rho,E_f,e,err_e\n")
    for p in points:
        buf.write(f"{p.rho:.10f},{p.fermi_energy:.10f},{p.energy_density:.10f},{p.err:.10f}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# finite boxes


def plane_wave_indices(L: int) -> np.ndarray:
    """The ``(L+1)^3`` integer triples ``m`` with ``-L/2 ≤ m_j ≤ (L+1)/2``."""
    r = np.arange(math.ceil(-L / 2), math.floor((L + 1) / 2) + 1)
    assert r.size == L + 1
    return np.array(list(itertools.product(r, r, r)))


@dataclass(frozen=True)
class BoxSpectrum:
    L: int
    modes: np.ndarray
    energies: np.ndarray
    dirichlet_modes: np.ndarray
    dirichlet_energies: np.ndarray

    def plane_wave(self, m) -> np.ndarray:
        """``f_m`` as a dense ``(L+1)^3`` array on ``[0, L]^3``."""
        x = np.arange(self.L + 1)
        ph = [np.exp(2j * np.pi * mj * x / (self.L + 1)) for mj in m]
        return np.einsum("i,j,k->ijk", *ph) / (self.L + 1) ** 1.5

    def dirichlet_mode(self, n) -> np.ndarray:
        """Normalized sine mode on the interior ``[1, L-1]^3``."""
        return dirichlet_mode(self.L, n)

    def overlaps(self, psi: np.ndarray) -> np.ndarray:
        """``<f_m|ψ>`` for ψ given on ``[0, L]^3``, ordered like :attr:`modes`."""
        n = self.L + 1
        coeffs = np.fft.fftn(psi) / n ** 1.5
        idx = np.mod(self.modes, n)
        return coeffs[idx[:, 0], idx[:, 1], idx[:, 2]]


def dirichlet_mode(L: int, n) -> np.ndarray:
    x = np.arange(1, L)
    s = [np.sqrt(2.0 / L) * np.sin(np.pi * nj * x / L) for nj in n]
    return np.einsum("i,j,k->ijk", *s)


def dirichlet_spectrum(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Modes ``n ∈ [1, L-1]^3`` in lexicographic order and their energies."""
    r = np.arange(1, L)
    modes = np.array(list(itertools.product(r, r, r)))
    energies = np.sum(2.0 * (1.0 - np.cos(np.pi * modes / L)), axis=1)
    return modes, energies


def box_modes(L: int, check: bool = True) -> BoxSpectrum:
    if L < 2:
        raise ValueError("box side must be at least 2")
    modes = plane_wave_indices(L)
    energies = dispersion(2.0 * np.pi * modes / (L + 1))
    dmodes, denergies = dirichlet_spectrum(L)
    spec = BoxSpectrum(L, modes, energies, dmodes, denergies)
    if check:
        rng = np.random.default_rng(L)
        for _ in range(4):
            i, j = rng.integers(len(modes), size=2)
            ov = np.vdot(spec.plane_wave(modes[i]), spec.plane_wave(modes[j]))
            if abs(ov - (i == j)) > 1e-12:
                raise AssertionError(f"plane waves {modes[i]} {modes[j]} not orthonormal")
    return spec


@dataclass(frozen=True)
class FermiProjection:
    M: int
    L: int
    modes: np.ndarray
    fermi_level: float

    @property
    def rank(self) -> int:
        return len(self.modes)

    @property
    def rank_ratio(self) -> float:
        return self.rank / self.M


def xi_projection(M: int, L: int) -> FermiProjection:
    """Plane waves on ``[0, L]^3`` with ``E(2πm/(L+1)) ≤ E_f(M/(L+1)^3)``."""
    vol = (L + 1) ** 3
    if not 1 <= M <= vol:
        raise ValueError("need 1 <= M <= (L+1)^3")
    modes = plane_wave_indices(L)
    energies = dispersion(2.0 * np.pi * modes / (L + 1))
    ef = fermi_energy(M / vol)
    sel = energies <= ef + 1e-12
    return FermiProjection(M, L, modes[sel], ef)


class FreeGroundEnergy(NamedTuple):
    energy: float
    degenerate: bool


def lowest_dirichlet(N: int, L: int) -> tuple[np.ndarray, np.ndarray, bool]:
    """Lowest ``N`` Dirichlet modes (ties broken lexicographically) and a shell-degeneracy flag."""
    modes, energies = dirichlet_spectrum(L)
    if N > len(modes):
        raise ValueError(f"{N} particles exceed {len(modes)} interior sites")
    order = np.argsort(np.round(energies, 12), kind="stable")
    chosen = order[:N]
    degenerate = bool(0 < N < len(modes) and abs(energies[order[N - 1]] - energies[order[N]]) < 1e-12)
    return modes[chosen], energies[chosen], degenerate


def free_ground_energy(N_u: int, N_d: int, L: int) -> FreeGroundEnergy:
    """Sum of the lowest ``N_u`` plus lowest ``N_d`` Dirichlet eigenvalues."""
    _, eu, du = lowest_dirichlet(N_u, L)
    _, ed, dd = lowest_dirichlet(N_d, L)
    return FreeGroundEnergy(float(eu.sum() + ed.sum()), du or dd)


def dirichlet_fermi_sea(N: int, L: int) -> np.ndarray:
    """Modes with energy at or below the ``N``-th lowest Dirichlet level (whole shells)."""
    modes, energies = dirichlet_spectrum(L)
    if N == 0:
        return modes[:0]
    level = np.sort(energies)[N - 1]
    return modes[energies <= level + 1e-12]
