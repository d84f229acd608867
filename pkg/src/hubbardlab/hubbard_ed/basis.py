"""Occupation-number bases for two species of lattice fermions on ``[1, L-1]^3``.

Each species lives in its own antisymmetric space ``H(N)``; a basis state is an
increasing tuple of occupied site indices. The two-species space is the tensor
product, stored as a dense ``(n_up, n_down)`` array of amplitudes. In the
hard-core case the doubly occupied pairs are excluded through a mask.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIMENSION_CAP = 200_000_000


class DimensionError(ValueError):
    """Requested basis is too large or inconsistent with the lattice."""


def interior_sites(L: int) -> np.ndarray:
    """Sites of ``[1, L-1]^3`` as an ``(S, 3)`` array in lexicographic order."""
    if L < 2:
        raise ValueError("box side must be at least 2")
    r = range(1, L)
    return np.array(list(itertools.product(r, r, r)), dtype=np.int64).reshape(-1, 3)


def neighbor_table(sites: np.ndarray, period: int | None = None) -> list[list[int]]:
    """Nearest neighbours of every site inside ``sites`` (wrapped when ``period`` is given)."""
    key = {tuple(s): i for i, s in enumerate(sites)}
    out = []
    for s in sites:
        nb = []
        for axis in range(3):
            for step in (1, -1):
                t = s.copy()
                t[axis] += step
                if period is not None:
                    t %= period
                j = key.get(tuple(t))
                if j is not None:
                    nb.append(j)
        out.append(nb)
    return out


@dataclass(frozen=True)
class SpeciesBasis:
    """All ``C(n_sites, n_particles)`` occupations in colexicographic order.

    ``rank`` is the combinatorial number system ``Σ_i C(c_i, i+1)`` of the sorted
    occupied sites, so it runs in O(N) with a precomputed binomial table.
    """

    n_sites: int
    n_particles: int
    states: np.ndarray = field(repr=False)
    binom: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, n_sites: int, n_particles: int) -> "SpeciesBasis":
        if not 0 <= n_particles <= n_sites:
            raise DimensionError(f"{n_particles} particles on {n_sites} sites")
        binom = np.zeros((n_sites + 1, n_particles + 2), dtype=np.int64)
        for n in range(n_sites + 1):
            for k in range(min(n, n_particles + 1) + 1):
                binom[n, k] = math.comb(n, k)
        combos = np.array(list(itertools.combinations(range(n_sites), n_particles)), dtype=np.int64)
        combos = combos.reshape(math.comb(n_sites, n_particles), n_particles)
        ranks = np.zeros(len(combos), dtype=np.int64)
        for i in range(n_particles):
            ranks += binom[combos[:, i], i + 1]
        states = np.empty_like(combos)
        states[ranks] = combos
        return cls(n_sites, n_particles, states, binom)

    @property
    def size(self) -> int:
        return len(self.states)

    def rank(self, occupied) -> int:
        occ = sorted(occupied)
        return int(sum(self.binom[c, i + 1] for i, c in enumerate(occ)))

    def unrank(self, index: int) -> tuple[int, ...]:
        out = []
        for k in range(self.n_particles, 0, -1):
            c = k - 1
            while c + 1 <= self.n_sites - 1 and self.binom[c + 1, k] <= index:
                c += 1
            out.append(c)
            index -= self.binom[c, k]
        return tuple(reversed(out))

    def occupation_matrix(self) -> np.ndarray:
        occ = np.zeros((self.size, self.n_sites), dtype=np.float32)
        if self.n_particles:
            rows = np.repeat(np.arange(self.size), self.n_particles)
            occ[rows, self.states.ravel()] = 1.0
        return occ


@dataclass(frozen=True)
class FockBasis:
    L: int
    n_up: int
    n_down: int
    hardcore: bool
    sites: np.ndarray = field(repr=False)
    up: SpeciesBasis = field(repr=False)
    down: SpeciesBasis = field(repr=False)
    double_occupancy: np.ndarray = field(repr=False)
    mask: np.ndarray | None = field(repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.up.size, self.down.size)

    @property
    def dimension(self) -> int:
        if self.mask is None:
            return self.up.size * self.down.size
        return int(np.count_nonzero(self.mask))

    def rank(self, up_sites, down_sites) -> tuple[int, int]:
        """Index pair of the configuration with the given occupied site indices."""
        i, j = self.up.rank(up_sites), self.down.rank(down_sites)
        if self.mask is not None and not self.mask[i, j]:
            raise KeyError("configuration is doubly occupied")
        return i, j

    def unrank(self, i: int, j: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.up.unrank(i), self.down.unrank(j)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def binomial_dimension(L: int, n_up: int, n_down: int) -> int:
    s = (L - 1) ** 3
    return math.comb(s, n_up) * math.comb(s, n_down)


def build_basis(
    L: int,
    n_up: int,
    n_down: int,
    hardcore: bool = False,
    dimension_cap: int = DEFAULT_DIMENSION_CAP,
    site_order: np.ndarray | None = None,
) -> FockBasis:
    """Enumerate ``H(N_u) ⊗ H(N_d)`` on the interior of ``[0, L]^3``.

    ``site_order`` optionally permutes the interior sites (used to check that
    results do not depend on the ordering convention).
    """
    sites = interior_sites(L)
    if site_order is not None:
        sites = sites[np.asarray(site_order)]
    s = len(sites)
    if n_up > s or n_down > s:
        raise DimensionError(f"particle number exceeds {s} interior sites")
    if hardcore and n_up + n_down > s:
        raise DimensionError("hard-core particles exceed the number of sites")
    full = binomial_dimension(L, n_up, n_down)
    if full > dimension_cap:
        raise DimensionError(f"dimension {full} exceeds cap {dimension_cap}")
    up = SpeciesBasis.build(s, n_up)
    down = up if n_down == n_up else SpeciesBasis.build(s, n_down)
    if n_up and n_down:
        docc = (up.occupation_matrix() @ down.occupation_matrix().T).astype(np.int8)
    else:
        docc = np.zeros((up.size, down.size), dtype=np.int8)
    mask = (docc == 0) if hardcore else None
    return FockBasis(L, n_up, n_down, hardcore, sites, up, down, docc, mask)
