import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from hubbardlab.ideal_fermi import dirichlet_mode, free_ground_energy
from hubbardlab.hubbard_ed.basis import (
    DimensionError, SpeciesBasis, binomial_dimension, build_basis, interior_sites,
)
from hubbardlab.hubbard_ed.checks import (
    LT_CONSTANT, lt_check, trace_bound_check, trace_bound_terms,
)
from hubbardlab.hubbard_ed.ground import (
    dirichlet_overlap_factor, fitted_effective_volume, ground_state, interaction_shift, start_vector,
    two_body_effective_volume,
)
from hubbardlab.hubbard_ed.hamiltonian import build_hamiltonian
from hubbardlab.hubbard_ed.lanczos import LanczosError, lanczos_ground
from hubbardlab.hubbard_ed.observables import (
    ED_CSV_HEADER, close_pair_count, close_pair_shape, double_occupancy, ed_result_row, observables,
    one_particle_dm,
)


# ---------------------------------------------------------------- oracles

def dirichlet_laplacian(L):
    """Dense -Δ on the interior of [0, L]^3 with diagonal 6, lexicographic order."""
    m = L - 1
    d1 = 2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
    I = np.eye(m)
    return np.kron(np.kron(d1, I), I) + np.kron(np.kron(I, d1), I) + np.kron(np.kron(I, I), d1)


def antisym_basis(S, N):
    """Orthonormal basis of the antisymmetric subspace of (C^S)^{⊗N}."""
    dim = S ** N
    P = np.zeros((dim, dim))
    for perm in itertools.permutations(range(N)):
        sign = np.linalg.det(np.eye(N)[list(perm)])
        for idx in itertools.product(range(S), repeat=N):
            src = np.ravel_multi_index(idx, (S,) * N)
            dst = np.ravel_multi_index(tuple(idx[p] for p in perm), (S,) * N)
            P[dst, src] += sign
    P /= math.factorial(N)
    w, v = np.linalg.eigh(P)
    return v[:, w > 0.5]


def first_quantized_e0(L, n_up, n_down, g):
    """Lowest eigenvalue built from tensor products of the one-body Laplacian."""
    h = dirichlet_laplacian(L)
    S = h.shape[0]
    n = n_up + n_down
    H = np.zeros((S ** n, S ** n))
    for k in range(n):
        ops = [np.eye(S)] * n
        ops[k] = h
        term = ops[0]
        for o in ops[1:]:
            term = np.kron(term, o)
        H += term
    configs = np.array(list(itertools.product(range(S), repeat=n)))
    pairs = np.zeros(len(configs))
    for i in range(n_up):
        for j in range(n_up, n):
            pairs += configs[:, i] == configs[:, j]
    Bu = antisym_basis(S, n_up) if n_up > 1 else np.eye(S)
    Bd = antisym_basis(S, n_down) if n_down > 1 else np.eye(S)
    B = np.kron(Bu, Bd)
    if math.isinf(g):
        allowed = pairs == 0
        # restrict to the antisymmetric functions supported on allowed configurations
        Pm = np.diag(allowed.astype(float))
        M = B.T @ Pm @ B
        w, v = np.linalg.eigh(M)
        C = B @ v[:, w > 0.5]
        return float(np.linalg.eigvalsh(C.T @ H @ C)[0])
    H += g * np.diag(pairs)
    return float(np.linalg.eigvalsh(B.T @ H @ B)[0])


def dense_e0(L, n_up, n_down, g):
    basis = build_basis(L, n_up, n_down, hardcore=math.isinf(g))
    return float(np.linalg.eigvalsh(build_hamiltonian(basis, g).to_dense())[0])


# ---------------------------------------------------------------- basis

def test_basis_dimensions():
    assert build_basis(3, 1, 0).dimension == 8
    assert build_basis(3, 1, 1, hardcore=True).dimension == 56
    assert binomial_dimension(5, 2, 2) == 4_064_256
    assert build_basis(5, 2, 2).dimension == 4_064_256


def test_basis_errors():
    with pytest.raises(DimensionError):
        build_basis(5, 2, 2, dimension_cap=1000)
    with pytest.raises(DimensionError):
        build_basis(3, 5, 4, hardcore=True)
    with pytest.raises(DimensionError):
        build_basis(3, 9, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.data())
def test_rank_unrank_roundtrip(N, data):
    sp = SpeciesBasis.build(12, N)
    idx = data.draw(st.integers(0, sp.size - 1))
    occ = sp.unrank(idx)
    assert sp.rank(occ) == idx
    assert tuple(sp.states[idx]) == occ
    assert list(occ) == sorted(set(occ))


def test_fock_rank_hardcore_rejects_double():
    b = build_basis(3, 1, 1, hardcore=True)
    assert b.unrank(*b.rank([2], [5])) == ((2,), (5,))
    with pytest.raises(KeyError):
        b.rank([3], [3])


# ---------------------------------------------------------------- hamiltonian

def test_single_particle_is_dirichlet_laplacian():
    L = 4
    H = build_hamiltonian(build_basis(L, 1, 0), 0.0).to_dense()
    np.testing.assert_array_equal(H, dirichlet_laplacian(L))
    assert np.linalg.eigvalsh(H)[0] == pytest.approx(6 * (1 - math.cos(math.pi / L)), abs=1e-12)


@pytest.mark.parametrize("L,nu,nd", [(3, 1, 1), (4, 2, 1), (4, 2, 2)])
def test_free_energy(L, nu, nd):
    gs = ground_state(build_basis(L, nu, nd), 0.0, tol=1e-10)
    assert gs.E0 == pytest.approx(free_ground_energy(nu, nd, L).energy, abs=1e-9)


def test_lanczos_matches_dense_small():
    e = ground_state(build_basis(3, 1, 1), 1.0, tol=1e-11).E0
    assert e == pytest.approx(dense_e0(3, 1, 1, 1.0), abs=1e-10)


@pytest.mark.parametrize("nu,nd,g", [(1, 1, 1.0), (2, 1, 2.5), (2, 1, math.inf), (2, 2, 0.7)])
def test_first_quantized_oracle(nu, nd, g):
    ref = first_quantized_e0(3, nu, nd, g)
    assert dense_e0(3, nu, nd, g) == pytest.approx(ref, abs=1e-10)
    gs = ground_state(build_basis(3, nu, nd, hardcore=math.isinf(g)), g, tol=1e-11)
    assert gs.E0 == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("nu,nd,g", [(2, 2, 1.5), (2, 1, math.inf), (3, 2, 0.3)])
def test_hermiticity(nu, nd, g):
    basis = build_basis(4, nu, nd, hardcore=math.isinf(g))
    H = build_hamiltonian(basis, g)
    rng = np.random.default_rng(1)
    keep = H.allowed()
    u = rng.standard_normal(basis.shape) * keep
    v = rng.standard_normal(basis.shape) * keep
    a, b = np.sum(u * H.matvec(v)), np.sum(H.matvec(u) * v)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_hardcore_matvec_stays_in_space():
    basis = build_basis(3, 2, 2, hardcore=True)
    H = build_hamiltonian(basis, math.inf)
    out = H.matvec(start_vector(basis))
    assert np.all(out[~basis.mask] == 0.0)


def test_invalid_couplings():
    with pytest.raises(ValueError):
        build_hamiltonian(build_basis(3, 1, 1), -1.0)
    with pytest.raises(ValueError):
        build_hamiltonian(build_basis(3, 1, 1), math.inf)


def test_spin_flip_symmetry():
    a = ground_state(build_basis(4, 2, 1), 3.0, tol=1e-11).E0
    b = ground_state(build_basis(4, 1, 2), 3.0, tol=1e-11).E0
    assert a == pytest.approx(b, abs=1e-10)


def test_permuted_site_order():
    g = 2.0
    ref = ground_state(build_basis(4, 2, 2), g, tol=1e-11)
    order = np.random.default_rng(3).permutation(27)
    perm = ground_state(build_basis(4, 2, 2, site_order=order), g, tol=1e-11)
    assert perm.E0 == pytest.approx(ref.E0, abs=1e-10)
    o1, o2 = observables(ref), observables(perm)
    assert o2.defect_u == pytest.approx(o1.defect_u, abs=1e-8)
    assert o2.i_r[1] == pytest.approx(o1.i_r[1], abs=1e-8)
    assert o2.double_occupancy == pytest.approx(o1.double_occupancy, abs=1e-8)


def test_monotone_in_g_and_hardcore_limit():
    L, nu, nd = 4, 2, 1
    energies = [ground_state(build_basis(L, nu, nd), g, tol=1e-11).E0 for g in (0.0, 1.0, 4.0, 16.0, 1e3)]
    e_inf = ground_state(build_basis(L, nu, nd, hardcore=True), math.inf, tol=1e-11).E0
    assert all(b >= a - 1e-10 for a, b in zip(energies, energies[1:]))
    assert e_inf >= energies[3] - 1e-10
    assert e_inf >= energies[4] - 1e-10
    # E0(g) approaches E0(inf) like 1/g
    assert e_inf - energies[4] < 0.02 * (e_inf - energies[0])
    free = energies[0]
    for g, e in zip((1.0, 4.0, 16.0), energies[1:4]):
        assert 0.0 <= e - free <= g * min(nu, nd) + 1e-10


def test_variational_bound_uses_free_energy():
    basis = build_basis(3, 1, 1)
    gs = ground_state(basis, 5.0)
    assert gs.E0 <= free_ground_energy(1, 1, 3).energy + 5.0


# ---------------------------------------------------------------- lanczos

def test_lanczos_paths_agree():
    rng = np.random.default_rng(0)
    n = 3000
    A = sparse.random(n, n, density=2e-3, random_state=1)
    A = (A + A.T) + sparse.diags(np.linspace(0, 5, n))
    ref = np.linalg.eigvalsh(A.toarray())[0]
    v0 = rng.random(n)
    small = lanczos_ground(lambda x: A @ x, v0, tol=1e-10)
    big = lanczos_ground(lambda x: A @ x, v0, tol=1e-10, full_reorth_limit=0)
    assert small.value == pytest.approx(ref, abs=1e-9)
    assert big.value == pytest.approx(ref, abs=1e-9)


def test_lanczos_validation():
    with pytest.raises(ValueError):
        lanczos_ground(lambda x: x, np.ones(4), tol=1e-3)
    A = np.diag(np.linspace(0, 1, 400)) + 1e-3 * np.eye(400, k=1) + 1e-3 * np.eye(400, k=-1)
    with pytest.raises(LanczosError) as err:
        lanczos_ground(lambda x: A @ x, np.ones(400), tol=1e-12, max_iter=5, max_restarts=0)
    assert err.value.best_residual > 0


def test_ground_state_deterministic():
    basis = build_basis(4, 2, 1)
    a = ground_state(basis, 2.0, seed=7)
    b = ground_state(basis, 2.0, seed=7)
    assert a.E0 == b.E0
    np.testing.assert_array_equal(a.vector, b.vector)


# ---------------------------------------------------------------- shifts

def test_two_body_effective_volume():
    for L in (4, 7, 10):
        assert two_body_effective_volume(L) == pytest.approx((2 * L / 3) ** 3, rel=1e-12)
    assert fitted_effective_volume(5) == pytest.approx((10 / 3) ** 3, rel=1e-3)


def test_overlap_factor():
    for L in (4, 6, 9):
        assert dirichlet_overlap_factor(L, 1, 1) == pytest.approx(27 / 8, rel=1e-12)
    # the second shell needs L > 4 before the sine product sums become L-independent
    for L in (5, 6, 9):
        assert dirichlet_overlap_factor(L, 2, 2) == pytest.approx(2.5, rel=1e-12)
    # brute force: average of |ψ_a|^2 |ψ_b|^2 over the three degenerate second modes
    L = 5
    m = [dirichlet_mode(L, n) ** 2 for n in ((1, 1, 2), (1, 2, 1), (2, 1, 1))]
    rho = dirichlet_mode(L, (1, 1, 1)) ** 2 + sum(m) / 3
    assert dirichlet_overlap_factor(L, 2, 2) == pytest.approx(L ** 3 * np.sum(rho * rho) / 4)


def test_shift_trivial_rows():
    row, _ = interaction_shift(3, 1, 1, 0.0)
    assert abs(row.dE) < 1e-9 and math.isnan(row.ratio) and "ratio_undefined" in row.flags
    row, _ = interaction_shift(4, 2, 0, 7.0)
    assert abs(row.dE) < 1e-9


def test_shift_two_body_row():
    row, _ = interaction_shift(4, 1, 1, 1.0, tol=1e-10)
    assert row.V_eff == pytest.approx((8 / 3) ** 3)
    assert row.a_extracted == pytest.approx(row.dE * row.V_eff / (8 * math.pi))


# ---------------------------------------------------------------- observables

def test_density_matrix_free_slater():
    L = 4
    gs = ground_state(build_basis(L, 1, 1), 0.0, tol=1e-11)
    dm = one_particle_dm(gs, "up")
    psi = dirichlet_mode(L, (1, 1, 1)).ravel()
    np.testing.assert_allclose(dm.gamma, np.outer(psi, psi), atol=1e-8)
    assert abs(dm.defect) < 1e-9


@pytest.mark.parametrize("g", [0.0, 2.0, math.inf])
def test_density_matrix_properties(g):
    basis = build_basis(4, 2, 3, hardcore=math.isinf(g))
    gs = ground_state(basis, g, tol=1e-10)
    for spin, n in (("up", 2), ("down", 3)):
        dm = one_particle_dm(gs, spin)
        assert dm.trace == pytest.approx(n, abs=1e-10)
        assert dm.eig_min >= -1e-10 and dm.eig_max <= 1 + 1e-10
        assert dm.defect >= -1e-10


def test_density_matrix_oracle():
    # brute-force <c†_a c_b> from explicit creation/annihilation on occupation tuples
    basis = build_basis(3, 2, 1)
    gs = ground_state(basis, 3.0, tol=1e-11)
    sp = basis.up
    S = basis.n_sites
    ref = np.zeros((S, S))
    for k, occ in enumerate(sp.states):
        occ = list(occ)
        for b in occ:
            for a in range(S):
                if a != b and a in occ:
                    continue
                pos = occ.index(b)
                s1 = (-1) ** pos
                rest = occ[:pos] + occ[pos + 1:]
                ins = sum(1 for c in rest if c < a)
                s2 = (-1) ** ins
                new = sorted(rest + [a])
                i = sp.rank(new)
                ref[a, b] += s1 * s2 * gs.vector[i] @ gs.vector[k]
    np.testing.assert_allclose(one_particle_dm(gs, "up").gamma, 0.5 * (ref + ref.T), atol=1e-12)


def test_close_pairs_trivial():
    gs = ground_state(build_basis(4, 2, 1), 1.0)
    assert close_pair_count(gs, [1, 2]) == {1: 0.0, 2: 0.0}
    gs = ground_state(build_basis(4, 1, 2), 1.0)
    # the box diameter is 2√3 < 2√3·R for R = 1 already
    assert close_pair_count(gs, [1])[1] == pytest.approx(2.0, abs=1e-12)


def test_close_pairs_brute():
    gs = ground_state(build_basis(5, 1, 2, hardcore=True), math.inf, tol=1e-10)
    sites = gs.basis.sites
    w = np.sum(gs.vector ** 2, axis=0)
    w /= w.sum()
    thr = 2 * math.sqrt(3) * 0.5  # R = 0.5 exercises a nontrivial threshold
    ref = 0.0
    for j, occ in enumerate(gs.basis.down.states):
        d = np.linalg.norm(sites[occ[0]] - sites[occ[1]])
        ref += w[j] * (2 if d <= thr else 0)
    assert close_pair_count(gs, [0.5])[0.5] == pytest.approx(ref, abs=1e-12)


def test_close_pair_shape():
    assert close_pair_shape(1, 2, 1 / 8) == pytest.approx(2.0)
    assert close_pair_shape(3, 4, 1e-3) == pytest.approx(4 * (64e-3) ** 0.4)


def test_double_occupancy_free():
    L = 3
    gs = ground_state(build_basis(L, 1, 1), 0.0, tol=1e-11)
    assert double_occupancy(gs) == pytest.approx(1 / two_body_effective_volume(L), abs=1e-9)


def test_result_row_schema():
    row, gs = interaction_shift(3, 1, 1, 1.0)
    rec = ed_result_row(row, gs)
    assert list(rec) == ED_CSV_HEADER.split(",")


@pytest.mark.slow
def test_defect_hardcore_l5():
    row, gs = interaction_shift(5, 2, 2, math.inf)
    obs = observables(gs)
    assert 0 < obs.defect_u < 0.2 * 2
    assert obs.i_r[1] / 2 < 1
    assert obs.gamma_u.trace == pytest.approx(2, abs=1e-10)


# ---------------------------------------------------------------- checks

def two_fermion_torus_e0(L, f):
    """Dense first-quantized two-particle operator on the periodic box, antisymmetric sector."""
    m = L
    d1 = 2 * np.eye(m) - np.roll(np.eye(m), 1, 1) - np.roll(np.eye(m), -1, 1)
    I = np.eye(m)
    h = np.kron(np.kron(d1, I), I) + np.kron(np.kron(I, d1), I) + np.kron(np.kron(I, I), d1)
    S = h.shape[0]
    coords = np.array(list(itertools.product(range(L), repeat=3)))
    diff = np.abs(coords[:, None, :] - coords[None, :, :])
    diff = np.minimum(diff, L - diff)
    dist = np.sqrt(np.sum(diff ** 2, axis=-1)).ravel()
    H = np.kron(h, np.eye(S)) + np.kron(np.eye(S), h) - 2 * np.diag(f(dist))
    B = antisym_basis(S, 2)
    return float(np.linalg.eigvalsh(B.T @ H @ B)[0])


def test_lt_check_zero_profile():
    r = lt_check(8, {"kind": "zero"})
    assert r.bound == 0.0
    assert r.min_eig == pytest.approx(2 * (1 - math.cos(2 * math.pi / 8)), abs=1e-8)
    assert r.holds


@pytest.mark.parametrize("spec", [{"kind": "step", "c": 2.0, "radius": 1.0},
                                  {"kind": "exp", "c": 3.0, "length": 1.0}])
def test_lt_check_dense_oracle(spec):
    from hubbardlab.hubbard_ed.checks import radial_profile
    r = lt_check(4, spec)
    assert r.min_eig == pytest.approx(two_fermion_torus_e0(4, radial_profile(spec)), abs=1e-8)
    assert r.holds


def test_lt_check_scaling():
    reps = [lt_check(8, {"kind": "step", "c": c, "radius": 2.0}) for c in (0.25, 1.0, 4.0)]
    assert all(r.holds for r in reps)
    assert reps[1].bound / reps[0].bound == pytest.approx(4 ** 2.5)
    assert LT_CONSTANT == pytest.approx(2 ** 5.5 / (15 * math.pi ** 2))


def test_trace_bound_special_cases():
    rng = np.random.default_rng(5)
    n = 8
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    xi = q[:, :3] @ q[:, :3].T
    A = rng.standard_normal((n, n))
    wp, wm = A @ A.T, 0.3 * np.eye(n)
    delta = 0.25
    lhs, rhs = trace_bound_terms(xi, xi, wp, wm, delta)
    assert lhs - rhs == pytest.approx(delta * (np.trace(xi @ wp) + np.trace(xi @ wm)))
    lhs, rhs = trace_bound_terms(xi / 2, xi, wp, 0 * wm, delta)
    expect = (0.5 * np.trace(xi @ wp) - (1 - delta) * np.trace(xi @ wp)
              + np.linalg.norm(wp, 2) * 1.5)
    assert lhs - rhs == pytest.approx(expect)
    assert lhs >= rhs


def test_trace_bound_random():
    rep = trace_bound_check(0, n_instances=200)
    assert rep.violations == 0
    with pytest.raises(ValueError):
        trace_bound_check(0, delta=1.5)


def test_interior_sites_order():
    s = interior_sites(4)
    assert s.shape == (27, 3) and tuple(s[1]) == (1, 1, 2)
