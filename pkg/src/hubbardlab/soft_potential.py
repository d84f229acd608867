"""Momentum filters, soft potentials and numerical certification of Dyson-type bounds.

All operators live on the periodic box of side ``Λ`` (a proxy for Z^3) and act
on flat arrays in C order. Filters are Fourier multipliers, potentials are
multiplication operators, and ``V`` is the finite-rank-corrected indicator
``(2R+1)^-3 (θ_A - P_A)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, ndimage, sparse
from scipy.sparse import linalg as sla

from .ideal_fermi import fermi_energy
from .lattice_core import LatticeField, dispersion_grid, momentum_grid
from .scattering import scattering_length

CERT_TOL = 1e-10


class CertificationError(RuntimeError):
    """Eigensolver did not converge or the configuration is invalid."""


# ---------------------------------------------------------------------------
# cutoff and filters


def _smoothstep5(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


@dataclass(frozen=True)
class CutoffProfile:
    """Radial profile ``l(t)``: 0 for t ≤ 1, quintic smoothstep on [1, 2], 1 for t ≥ 2."""

    def __call__(self, t):
        return _smoothstep5(np.asarray(t, dtype=float) - 1.0)

    def derivative(self, t):
        u = np.asarray(t, dtype=float) - 1.0
        inside = (u > 0) & (u < 1)
        return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


def build_cutoff() -> CutoffProfile:
    return CutoffProfile()


def _momentum_norm(period: int) -> np.ndarray:
    kx, ky, kz = momentum_grid(period)
    return np.sqrt(kx ** 2 + ky ** 2 + kz ** 2)


@dataclass(frozen=True)
class FilterPair:
    """``ĥ_s(p) = l(s|p|)`` and ``ĥ'_s = 1 - ĥ_s`` on the period-Λ grid.

    ``s = inf`` denotes the trivial filter ``ĥ ≡ 1`` (so ``h' = 0``).
    """

    s: float
    period: int
    h_hat: np.ndarray = field(repr=False)
    hp_hat: np.ndarray = field(repr=False)
    hp: LatticeField = field(repr=False)
    abs_mass: float = 0.0
    mass: float = 0.0
    truncation_error: float = 0.0

    @property
    def trivial(self) -> bool:
        return math.isinf(self.s)

    def apply(self, f: np.ndarray, prime: bool = False) -> np.ndarray:
        """``C_h f`` (or ``C_h' f``) for a real ``(Λ, Λ, Λ)`` array."""
        mult = self.hp_hat if prime else self.h_hat
        if not prime and self.trivial:
            return f
        return np.fft.ifftn(mult * np.fft.fftn(f)).real


def build_filter(s: float, period: int) -> FilterPair:
    if s < 1:
        raise ValueError("filter scale s must be at least 1")
    if period < 8 * s:
        raise ValueError(f"period {period} cannot resolve the filter support |p| <= 2/{s}; need >= {8 * s}")
    h_hat = build_cutoff()(s * _momentum_norm(period))
    hp_hat = 1.0 - h_hat
    hp = np.fft.ifftn(hp_hat).real
    # periodization proxy: largest kernel value on the outermost shell |x|_∞ ≥ Λ/2 - 1
    idx = np.minimum(np.arange(period), period - np.arange(period))
    dist = np.maximum(np.maximum(idx[:, None, None], idx[None, :, None]), idx[None, None, :])
    tail = float(np.abs(hp[dist >= period // 2 - 1]).max())
    return FilterPair(float(s), period, h_hat, hp_hat, LatticeField.on_periodic(hp),
                      float(np.abs(hp).sum()), float(hp.sum()), tail)


def trivial_filter(period: int) -> FilterPair:
    shape = (period,) * 3
    zero = np.zeros(shape)
    return FilterPair(math.inf, period, np.ones(shape), zero, LatticeField.on_periodic(zero))


@dataclass(frozen=True)
class MomentumSplit:
    """``M̂(p) = sqrt([1 - E_f(ρ_u)/E(p)]_+)`` and ``M̂' = sqrt(1 - M̂²)``."""

    rho_u: float
    period: int
    m_hat: np.ndarray = field(repr=False)
    mp_hat: np.ndarray = field(repr=False)


def momentum_split(rho_u: float, period: int) -> MomentumSplit:
    ef = fermi_energy(rho_u)
    e = dispersion_grid(period)
    safe = np.where(e > 0, e, 1.0)
    m2 = np.where(e > ef, 1.0 - ef / safe, 0.0)
    m2 = np.clip(m2, 0.0, 1.0)
    return MomentumSplit(rho_u, period, np.sqrt(m2), np.sqrt(1.0 - m2))


# ---------------------------------------------------------------------------
# f_r, soft potentials


def _cube_offsets(r: int, period: int) -> tuple[np.ndarray, ...]:
    """Flat-array index pieces of A(r) = [-r, r]^3 wrapped into the box."""
    c = np.mod(np.arange(-r, r + 1), period)
    return np.ix_(c, c, c)


def f_r_compute(pair: FilterPair, r: int) -> LatticeField:
    """``f_r(x) = max_{y ∈ x + A(r)} |h'(y) - h'(x)|`` on the periodic box."""
    if r < 1:
        raise ValueError("r must be at least 1")
    h = np.asarray(pair.hp.values)
    size = 2 * r + 1
    hi = ndimage.maximum_filter(h, size=size, mode="wrap")
    lo = ndimage.minimum_filter(h, size=size, mode="wrap")
    return LatticeField.on_periodic(np.maximum(hi - h, h - lo))


def cube_indicator(R: int, period: int, center: Sequence[int] = (0, 0, 0)) -> np.ndarray:
    if 2 * R + 1 > period:
        raise ValueError("cube does not fit in the periodic box")
    theta = np.zeros((period,) * 3)
    theta[_cube_offsets(R, period)] = 1.0
    return np.roll(theta, tuple(center), axis=(0, 1, 2))


@dataclass(frozen=True)
class SoftPotentialSet:
    R: int
    eps: float
    eta: float
    period: int
    U: LatticeField = field(repr=False)
    W: LatticeField = field(repr=False)
    f_R: LatticeField = field(repr=False)
    theta: np.ndarray = field(repr=False)

    @property
    def volume(self) -> int:
        return (2 * self.R + 1) ** 3

    def apply_V(self, f: np.ndarray, center: Sequence[int] = (0, 0, 0)) -> np.ndarray:
        """``(2R+1)^-3 (θ_A - P_A) f`` with ``A`` the cube around ``center``."""
        theta = self.theta if not any(center) else np.roll(self.theta, tuple(center), axis=(0, 1, 2))
        tf = theta * f
        return (tf - theta * (tf.sum() / self.volume)) / self.volume


def build_soft_set(pair: FilterPair, R: int, eps: float, eta: float) -> SoftPotentialSet:
    if R < 1:
        raise ValueError("R must be at least 1")
    if not (0 < eps < 1 and 0 < eta < 1):
        raise ValueError("eps and eta must lie in (0, 1)")
    period = pair.period
    theta = cube_indicator(R, period)
    U = theta / (2 * R + 1) ** 3
    f = f_r_compute(pair, R)
    fv = np.asarray(f.values)
    W = 16.0 * math.pi * fv * fv.sum()
    return SoftPotentialSet(R, eps, eta, period, LatticeField.on_periodic(U), LatticeField.on_periodic(W), f, theta)


# ---------------------------------------------------------------------------
# W scalings


def separated_centers(R: int, period: int) -> np.ndarray:
    """Cubic array with spacing ``floor(2√3 R) + 1``, separated also across the wrap."""
    d = int(math.floor(2 * math.sqrt(3) * R)) + 1
    m = period // d
    if m < 1:
        raise ValueError("box too small for a separated configuration")
    r = d * np.arange(m)
    return np.array(np.meshgrid(r, r, r, indexing="ij")).reshape(3, -1).T


@dataclass(frozen=True)
class ScalingReport:
    R: int
    s: float
    max_W: float
    sum_W: float
    separated_max: float


def scaling_report(pair: FilterPair, R: int) -> ScalingReport:
    if not pair.trivial and not 1 <= R <= pair.s:
        raise ValueError("need 1 <= R <= s")
    soft = build_soft_set(pair, R, 0.5, 0.5)
    W = np.asarray(soft.W.values)
    comb = np.zeros_like(W)
    c = separated_centers(R, pair.period)
    comb[c[:, 0], c[:, 1], c[:, 2]] = 1.0
    folded = np.fft.ifftn(np.fft.fftn(W) * np.fft.fftn(comb)).real
    return ScalingReport(R, pair.s, float(W.max()), float(W.sum()), float(folded.max()))


EXPECTED_EXPONENTS = {"max_W": (2.0, -5.0), "sum_W": (2.0, -2.0), "separated_max": (-1.0, -2.0)}


@dataclass(frozen=True)
class ScalingFit:
    reports: tuple
    exponents: dict
    constants: dict
    within_tolerance: bool


def fit_scaling(s_values: Sequence[float], R_values: Sequence[int], period_factor: int = 8,
                tolerance: float = 0.2, max_ratio: float = 0.25) -> ScalingFit:
    """Least-squares fit of ``log q = log c + α log R + β log s`` for each quantity.

    Only points with ``R ≤ max_ratio·s`` enter: the power laws describe the
    regime ``R ≪ s`` where ``f_R`` is linear in ``R``.
    """
    reports = []
    for s in s_values:
        chosen = [R for R in R_values if R <= max_ratio * s]
        if not chosen:
            continue
        pair = build_filter(s, int(math.ceil(period_factor * s)))
        for R in chosen:
            reports.append(scaling_report(pair, R))
    if len(reports) < 3:
        raise ValueError("need at least three (R, s) points for the fit")
    X = np.column_stack([np.ones(len(reports)), np.log([r.R for r in reports]), np.log([r.s for r in reports])])
    exps, consts, ok = {}, {}, True
    for name, (ea, eb) in EXPECTED_EXPONENTS.items():
        y = np.log([getattr(r, name) for r in reports])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        exps[name] = (float(coef[1]), float(coef[2]))
        consts[name] = float(math.exp(coef[0]))
        ok &= abs(coef[1] - ea) <= tolerance * abs(ea) and abs(coef[2] - eb) <= tolerance * abs(eb)
    return ScalingFit(tuple(reports), exps, consts, bool(ok))


# ---------------------------------------------------------------------------
# operators on the periodic box


def neumann_apply(theta: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``[∇^† θ ∇]_s f = ½ Σ_j (D_j^T θ D_j + B_j^T θ B_j) f`` with forward/backward differences."""
    out = np.zeros_like(f)
    for ax in range(3):
        d = np.roll(f, -1, axis=ax) - f  # f(x+e) - f(x)
        u = theta * d
        out += np.roll(u, 1, axis=ax) - u
        b = f - np.roll(f, 1, axis=ax)  # f(x) - f(x-e)
        w = theta * b
        out += w - np.roll(w, -1, axis=ax)
    return 0.5 * out


def neg_laplacian_apply(f: np.ndarray) -> np.ndarray:
    out = 6.0 * f
    for ax in range(3):
        out -= np.roll(f, 1, axis=ax) + np.roll(f, -1, axis=ax)
    return out


def _shift_matrix(period: int, axis: int, step: int) -> sparse.csr_matrix:
    """Sparse ``(S f)(x) = f(x + step·e_axis)`` on the flattened box."""
    n = period ** 3
    idx = np.arange(n).reshape((period,) * 3)
    src = np.roll(idx, -step, axis=axis).ravel()
    return sparse.csr_matrix((np.ones(n), (np.arange(n), src)), shape=(n, n))


def neumann_sparse(theta: np.ndarray) -> sparse.csr_matrix:
    period = theta.shape[0]
    n = period ** 3
    eye = sparse.identity(n, format="csr")
    T = sparse.diags(theta.ravel())
    out = sparse.csr_matrix((n, n))
    for ax in range(3):
        D = _shift_matrix(period, ax, 1) - eye
        B = eye - _shift_matrix(period, ax, -1)
        out = out + D.T @ T @ D + B.T @ T @ B
    return (0.5 * out).tocsr()


@dataclass(frozen=True)
class CertificationReport:
    g: float
    R: int
    s: float
    eps: float
    eta: float
    C_V: float
    period: int
    min_eig: float
    lhs_norm: float
    residual: float
    passed: bool
    method: str
    support_min_eig: float = math.nan
    below_recommended_period: bool = False

    def csv_row(self) -> str:
        return (f"{self.g},{self.R},{self.s},{self.eps},{self.eta},{self.C_V},{self.period},"
                f"{self.min_eig:.12e},{int(self.passed)}")


CERT_CSV_HEADER = "g,R,s,eps,eta,C_V,Lambda,min_eig,pass"


def _lhs_norm_bound(g: float) -> float:
    # ĥ ≤ 1 and the Neumann form is dominated by -Δ ≤ 12
    return 12.0 if math.isinf(g) else 12.0 + 0.5 * g


def _lowest(op: sla.LinearOperator, n: int, removed: np.ndarray, tol: float, maxiter: int):
    """Lowest eigenpair of ``op`` on the complement of ``removed`` sites (exact block split).

    ARPACK drops an exact null space of the operator from its Krylov space, so
    the solve runs on ``op + I`` and the shift is subtracted afterwards.
    """
    keep = np.ones(n, dtype=bool)
    keep[removed] = False
    penalty = 1e3
    shift = 1.0

    def matvec(x):
        x = x.ravel()
        out = op.matvec(np.where(keep, x, 0.0))
        return np.where(keep, out, penalty * x)

    A = sla.LinearOperator((n, n), matvec=lambda x: matvec(x) + shift * x.ravel(), dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    vals, vecs = sla.eigsh(A, k=1, which="SA", tol=tol, maxiter=maxiter, v0=v0)
    lam = float(vals[0]) - shift
    v = vecs[:, 0]
    residual = float(np.linalg.norm(matvec(v) - lam * v))
    return lam, residual


def _certify_dense(matrix: np.ndarray):
    vals, vecs = linalg.eigh(matrix, subset_by_index=[0, 0], driver="evr")
    v = vecs[:, 0]
    residual = float(np.linalg.norm(matrix @ v - vals[0] * v))
    return float(vals[0]), residual


def _rhs_diag_coeffs(g: float, soft: SoftPotentialSet):
    a = scattering_length(g)
    pref = 4.0 * math.pi * a
    return pref, pref * (1 - soft.eps) * (1 - soft.eta), pref / soft.eps


def certify_lemma1(g: float, pair: FilterPair, soft: SoftPotentialSet, C_V: float = 1.0,
                   tol: float = CERT_TOL, method: str = "auto", maxiter: int = 3000) -> CertificationReport:
    """Minimum eigenvalue of ``C_h^†[∇^†θ_A∇]_s C_h + (g/2)δ_0 - 4πa[(1-ε)(1-η)U - W/ε - C_V V/η]``.

    ``g = inf`` removes the origin from the space. For the trivial filter the
    operator vanishes identically outside ``A(R+1)``, so a dense solve on that
    block is exact; otherwise the operator is applied matrix-free with FFTs.
    """
    period = pair.period
    if period != soft.period:
        raise ValueError("filter and potentials live on different boxes")
    if period < 2 * soft.R + 3:
        raise ValueError("period too small to hold A(R+1)")
    if g < 0:
        raise ValueError("g must be nonnegative")
    pref, cu, cw = _rhs_diag_coeffs(g, soft)
    cv = pref * C_V / soft.eta
    U = np.asarray(soft.U.values)
    W = np.asarray(soft.W.values)
    diag = -cu * U + cw * W
    hardcore = math.isinf(g)
    if not hardcore:
        diag = diag.copy()
        diag[0, 0, 0] += 0.5 * g
    n = period ** 3
    norm = _lhs_norm_bound(g)

    if method == "auto":
        method = "dense" if pair.trivial else "matrix-free"
    if method == "dense":
        if not pair.trivial:
            raise ValueError("dense path only supports the trivial filter")
        full = neumann_sparse(soft.theta)
        # sites coupled to A(R); every other row of the operator is identically zero
        support = np.asarray(abs(full).sum(axis=1)).ravel() > 0
        support |= soft.theta.ravel() > 0
        if hardcore:
            support[0] = False
        idx = np.nonzero(support)[0]
        N = full[idx][:, idx].toarray()
        N[np.diag_indices_from(N)] += diag.ravel()[idx]
        th = soft.theta.ravel()[idx]
        vol = soft.volume
        # + C_V V / η: θ/vol - θθ^T/vol^2
        N[np.diag_indices_from(N)] += cv * th / vol
        N -= cv * np.outer(th, th) / vol ** 2
        lam, res = _certify_dense(N)
        block_min = lam
        # the complement of the block contributes the eigenvalue 0
        lam = min(lam, 0.0) if idx.size < n - int(hardcore) else lam
    else:
        def matvec(x):
            f = x.reshape((period,) * 3)
            hf = pair.apply(f)
            out = pair.apply(neumann_apply(soft.theta, hf))
            out = out + diag * f + cv * soft.apply_V(f)
            return out.ravel()

        op = sla.LinearOperator((n, n), matvec=matvec, dtype=float)
        removed = np.array([0]) if hardcore else np.array([], dtype=int)
        try:
            lam, res = _lowest(op, n, removed, tol, maxiter)
        except sla.ArpackNoConvergence as exc:
            raise CertificationError(f"eigensolver did not converge: {exc}") from exc
        block_min = lam
    passed = lam >= -CERT_TOL * norm
    small = period < 8 * max(soft.R, 0 if pair.trivial else pair.s)
    return CertificationReport(g, soft.R, pair.s, soft.eps, soft.eta, C_V, period, lam, norm, res,
                               bool(passed), method, block_min, small)


def min_image_distance(x, y, period: int) -> float:
    d = np.abs(np.asarray(x) - np.asarray(y)) % period
    d = np.minimum(d, period - d)
    return float(np.sqrt(np.sum(d * d)))


def certify_corollary(g: float, pair: FilterPair, soft: SoftPotentialSet, centers, C_V: float = 1.0,
                      tol: float = CERT_TOL, maxiter: int = 3000) -> CertificationReport:
    """Same certification with ``-C_h^†ΔC_h + (g/2)Σδ_{y_i}`` and translated potentials."""
    period = pair.period
    centers = [tuple(int(c) % period for c in y) for y in centers]
    limit = 2.0 * math.sqrt(3.0) * soft.R
    for i in range(len(centers)):
        for j in range(i):
            if min_image_distance(centers[i], centers[j], period) <= limit:
                raise ValueError(f"centers {centers[j]} and {centers[i]} are not separated by more than 2√3R")
    pref, cu, cw = _rhs_diag_coeffs(g, soft)
    cv = pref * C_V / soft.eta
    U = np.asarray(soft.U.values)
    W = np.asarray(soft.W.values)
    diag = np.zeros((period,) * 3)
    for y in centers:
        diag += np.roll(-cu * U + cw * W, y, axis=(0, 1, 2))
    hardcore = math.isinf(g)
    if not hardcore:
        for y in centers:
            diag[y] += 0.5 * g
    n = period ** 3

    def matvec(x):
        f = x.reshape((period,) * 3)
        out = pair.apply(neg_laplacian_apply(pair.apply(f))) + diag * f
        for y in centers:
            out = out + cv * soft.apply_V(f, y)
        return out.ravel()

    op = sla.LinearOperator((n, n), matvec=matvec, dtype=float)
    removed = np.array([np.ravel_multi_index(y, (period,) * 3) for y in centers]) if hardcore else np.array([], dtype=int)
    try:
        lam, res = _lowest(op, n, removed, tol, maxiter)
    except sla.ArpackNoConvergence as exc:
        raise CertificationError(f"eigensolver did not converge: {exc}") from exc
    norm = _lhs_norm_bound(g) if hardcore else 12.0 + 0.5 * g
    return CertificationReport(g, soft.R, pair.s, soft.eps, soft.eta, C_V, period, lam, norm, res,
                               bool(lam >= -CERT_TOL * norm), "matrix-free", lam, period < 8 * soft.R)


def lhs_min_eigenvalue(g: float, pair: FilterPair, R: int) -> float:
    """Lowest eigenvalue of the left-hand side alone (must be ≥ 0)."""
    soft = build_soft_set(pair, R, 0.5, 0.5)
    zero = SoftPotentialSet(R, 0.5, 0.5, pair.period, LatticeField.on_periodic(np.zeros_like(soft.theta)),
                            LatticeField.on_periodic(np.zeros_like(soft.theta)), soft.f_R, soft.theta)
    return certify_lemma1(g, pair, zero, C_V=0.0).min_eig


def minimal_cv(g: float, pair: FilterPair, soft: SoftPotentialSet, upper: float = 100.0,
               rel: float = 1e-3) -> float | None:
    """Smallest ``C_V`` in ``(0, upper]`` that passes (the verdict is monotone in ``C_V``), or None."""
    if not certify_lemma1(g, pair, soft, upper).passed:
        return None
    lo, hi = 0.0, upper
    if certify_lemma1(g, pair, soft, 0.0).passed:
        return 0.0
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if certify_lemma1(g, pair, soft, mid).passed:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class StabilityReport:
    reports: tuple
    stable: bool


def certify_stability(g: float, R: int, eps: float, eta: float, C_V: float,
                      periods: Sequence[int] = (32, 64), s: float | None = None) -> StabilityReport:
    """Repeat :func:`certify_lemma1` on several box sizes and compare verdicts."""
    reps = []
    for period in periods:
        pair = trivial_filter(period) if s is None else build_filter(s, period)
        reps.append(certify_lemma1(g, pair, build_soft_set(pair, R, eps, eta), C_V))
    return StabilityReport(tuple(reps), len({r.passed for r in reps}) == 1)


# ---------------------------------------------------------------------------
# parameter bookkeeping


def min_energy_outside(s: float) -> float:
    """``min E(p)`` over ``p ∈ [-π, π]^3`` with ``|p| ≥ 1/s``; attained on a coordinate axis."""
    t = 1.0 / s
    if t > math.sqrt(3) * math.pi:
        raise ValueError("no momenta with |p| >= 1/s")
    if t <= math.pi:
        return 2.0 * (1.0 - math.cos(t))
    # beyond the zone edge along an axis: spread the excess over the other axes
    from scipy import optimize

    def energy(q):
        rest = math.sqrt(max(t * t - math.pi ** 2 - q * q, 0.0))
        return 4.0 + 2.0 * (1.0 - math.cos(q)) + 2.0 * (1.0 - math.cos(rest))

    res = optimize.minimize_scalar(energy, bounds=(0.0, math.sqrt(max(t * t - math.pi ** 2, 0.0))), method="bounded")
    return float(res.fun)


@dataclass(frozen=True)
class SesMargin:
    s: float
    rho_u: float
    factor: float
    proxy: float
    c: float


def ses_margin(s: float, rho_u: float) -> SesMargin:
    """``[1 - E_f(ρ_u)/min_{|p|≥1/s} E(p)]_+`` and the lower bound ``1 - c s² ρ_u^{2/3}``.

    The lattice Fermi energy never exceeds the continuum value ``(6π²ρ)^{2/3}``,
    and ``s^{-2}/min E`` is the only other factor, so
    ``c = (6π²)^{2/3} / (s² min E)`` makes the proxy a valid lower bound.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    emin = min_energy_outside(s)
    ef = fermi_energy(rho_u)
    factor = max(1.0 - ef / emin, 0.0)
    c = (6 * math.pi ** 2) ** (2 / 3) / (s * s * emin)
    return SesMargin(s, rho_u, factor, 1.0 - c * s * s * rho_u ** (2 / 3), c)


@dataclass(frozen=True)
class ParamChoice:
    R: int
    s: int
    eps: float
    eta: float
    delta: float
    R_exact: float
    s_exact: float
    valid: bool
    flags: tuple


def param_heuristics(a: float, rho: float) -> ParamChoice:
    if a <= 0 or rho <= 0:
        raise ValueError("a and rho must be positive")
    x = a ** 3 * rho
    R = rho ** (-1 / 3) * x ** (1 / 30)
    s = rho ** (-1 / 3) * x ** (1 / 90)
    e = x ** (1 / 45)
    Ri, si = max(1, int(round(R))), max(1, int(round(s)))
    flags = []
    if not 0 < e < 1:
        flags.append("eps_eta_delta_outside_unit_interval")
    if (a * rho ** (1 / 3)) ** 0.1 < rho ** (1 / 3):
        flags.append("smallness_condition_fails")
    if Ri > si:
        flags.append("R_exceeds_s")
    if R < 1:
        flags.append("R_below_one")
    return ParamChoice(Ri, si, e, e, e, R, s, not flags, tuple(flags))
