import math

import numpy as np
import pytest

from hubbardlab.ideal_fermi import (
    box_modes,
    continuum_energy_density,
    dirichlet_fermi_sea,
    dirichlet_spectrum,
    e0,
    energy_density,
    eos_csv,
    eos_point,
    fermi_energy,
    free_ground_energy,
    lowest_dirichlet,
    occupied_energy,
    occupied_volume,
    xi_projection,
)
from hubbardlab.lattice_core import LatticeField, kinetic_energy


def grid_oracle(energy, n=320):
    """Midpoint counting on an n^3 Brillouin-zone grid, one slab at a time."""
    k = -np.pi + 2 * np.pi * (np.arange(n) + 0.5) / n
    e1 = 2 * (1 - np.cos(k))
    e23 = e1[:, None] + e1[None, :]
    count = total = 0.0
    for a in e1:
        e = a + e23
        inside = e <= energy
        count += inside.sum()
        total += (e * inside).sum()
    return count / n ** 3, total / n ** 3


@pytest.mark.parametrize("energy", [1.7, 5.2, 9.5])
def test_volume_and_energy_match_grid_count(energy):
    vol, en = grid_oracle(energy)
    assert occupied_volume(energy) == pytest.approx(vol, abs=1e-4)
    assert occupied_energy(energy)[0] == pytest.approx(en, abs=5e-4)


def test_exact_band_values():
    assert fermi_energy(1.0) == 12.0
    assert fermi_energy(0.5) == pytest.approx(6.0, abs=1e-8)
    assert fermi_energy(0.0) == 0.0
    assert energy_density(1.0)[0] == 6.0
    assert energy_density(0.0)[0] == 0.0
    # full band through the quadrature path as well
    assert occupied_energy(12.0 - 1e-9)[0] == pytest.approx(6.0, abs=1e-7)


def test_fermi_energy_small_density():
    rho = 1e-3
    assert fermi_energy(rho) == pytest.approx((6 * math.pi ** 2 * rho) ** (2 / 3), rel=0.05)


def test_energy_density_leading_term():
    rho = 1e-3
    assert energy_density(rho)[0] / continuum_energy_density(rho) == pytest.approx(1.0, abs=0.05)


def test_e0():
    assert e0(0.2, 0.0) == energy_density(0.2)[0]
    assert e0(0.1, 0.3) == e0(0.3, 0.1)
    rho = 1e-3
    assert e0(rho, rho) == pytest.approx(2 * continuum_energy_density(rho), rel=0.05)


def test_monotone_and_convex():
    rhos = np.linspace(0.01, 0.99, 50)
    ef = [fermi_energy(float(r)) for r in rhos]
    e = [energy_density(float(r))[0] for r in rhos]
    assert np.all(np.diff(ef) > 0)
    assert np.all(np.diff(e) > 0)
    assert np.all(np.diff(e, 2) > -1e-9)


def test_particle_hole_symmetry():
    for rho in np.linspace(0.02, 0.48, 20):
        assert fermi_energy(float(rho)) + fermi_energy(float(1 - rho)) == pytest.approx(12.0, abs=1e-8)


def test_rejects_bad_density():
    with pytest.raises(ValueError):
        fermi_energy(1.5)


def test_eos_csv_format():
    text = eos_csv([eos_point(0.5)])
    header, row = text.strip().split("\n")
    assert header == "rho,E_f,e,err_e"
    fields = row.split(",")
    assert fields[0] == "0.5000000000"
    assert all(len(f.split(".")[1]) == 10 for f in fields)


# --- box modes ----------------------------------------------------------------


def test_plane_wave_orthonormality():
    spec = box_modes(5)
    rng = np.random.default_rng(1)
    assert len(spec.modes) == 6 ** 3
    assert len(spec.dirichlet_modes) == 4 ** 3
    for _ in range(20):
        i, j = rng.integers(len(spec.modes), size=2)
        ov = np.vdot(spec.plane_wave(spec.modes[i]), spec.plane_wave(spec.modes[j]))
        assert ov == pytest.approx(float(i == j), abs=1e-12)


def test_momenta_distinct():
    for L in (4, 5):
        spec = box_modes(L)
        assert len({tuple(np.mod(m, L + 1)) for m in spec.modes}) == (L + 1) ** 3


def test_dirichlet_ground_energy():
    for L in (3, 4, 7):
        _, energies = dirichlet_spectrum(L)
        assert energies.min() == pytest.approx(6 * (1 - math.cos(math.pi / L)))


@pytest.mark.parametrize("L", [4, 6, 8])
def test_kinetic_mode_sum(L):
    spec = box_modes(L, check=False)
    rng = np.random.default_rng(L)
    for _ in range(50):
        psi = np.zeros((L + 1,) * 3, dtype=complex)
        psi[1:L, 1:L, 1:L] = rng.standard_normal((L - 1,) * 3) + 1j * rng.standard_normal((L - 1,) * 3)
        direct = kinetic_energy(LatticeField(psi))
        modes = np.sum(spec.energies * np.abs(spec.overlaps(psi)) ** 2)
        assert modes == pytest.approx(direct, rel=1e-12)


def test_dirichlet_modes_diagonalize_restricted_laplacian():
    L = 5
    for n in [(1, 1, 1), (2, 1, 3)]:
        mode = np.zeros((L + 1,) * 3)
        spec = box_modes(L, check=False)
        mode[1:L, 1:L, 1:L] = spec.dirichlet_mode(n)
        e = np.sum(2 * (1 - np.cos(np.pi * np.array(n) / L)))
        assert kinetic_energy(LatticeField(mode)) == pytest.approx(e, rel=1e-12)


# --- projections ---------------------------------------------------------------


def test_xi_full_band():
    L = 3
    assert xi_projection(64, L).rank == 64


def test_xi_rank_at_least_one():
    for L in (3, 6):
        assert xi_projection(1, L).rank >= 1


def test_xi_rank_ratio_trend():
    ratios = [xi_projection((L + 1) ** 3 // 8, L).rank_ratio for L in (7, 11, 15)]
    gaps = [abs(r - 1) for r in ratios]
    assert ratios[0] < ratios[1] < ratios[2]
    assert gaps[0] > gaps[1] > gaps[2]


def test_xi_rejects_bad_particle_number():
    with pytest.raises(ValueError):
        xi_projection(0, 4)


def test_free_ground_energy():
    L = 5
    assert free_ground_energy(1, 0, L).energy == pytest.approx(6 * (1 - math.cos(math.pi / L)))
    assert free_ground_energy(0, 0, L).energy == 0.0
    assert free_ground_energy(0, 2, L) == free_ground_energy(2, 0, L)
    # second level is three-fold degenerate
    assert free_ground_energy(2, 0, L).degenerate
    assert not free_ground_energy(4, 0, L).degenerate
    with pytest.raises(ValueError):
        free_ground_energy(100, 0, L)


def test_lowest_dirichlet_tie_breaking_is_lexicographic():
    modes, _, deg = lowest_dirichlet(2, 5)
    assert deg
    assert tuple(modes[1]) == (1, 1, 2)


def test_dirichlet_fermi_sea_closes_shells():
    assert len(dirichlet_fermi_sea(2, 5)) == 4
    assert len(dirichlet_fermi_sea(1, 5)) == 1
    assert len(dirichlet_fermi_sea(0, 5)) == 0
