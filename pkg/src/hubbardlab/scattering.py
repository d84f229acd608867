"""Zero-energy two-body scattering for the on-site interaction ``g δ_{x,0}``.

Provides the Brillouin-zone constant γ, the scattering length ``a(g)``, and the
zero-energy solution φ on a cube ``A(r_max)`` together with the identities it
satisfies (discrete Gauss law, ``1 - a/|x|`` tail).
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import erf, ive

from .lattice_core import BoxRegion, LatticeField, boundary_links, laplacian_apply


class QuadratureError(RuntimeError):
    """Two quadrature routes disagree, or a requested accuracy is not reached."""


# ---------------------------------------------------------------------------
# γ = (2π)^-3 ∫ dk / (4 Σ(1 - cos k_i))


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    err: float
    method_a: float
    method_b: float


def _gamma_integrand(k1, k2, k3):
    return 1.0 / (4.0 * (3.0 - np.cos(k1) - np.cos(k2) - np.cos(k3)))


def _smoothstep(u: np.ndarray, order: int = 6) -> np.ndarray:
    """Polynomial step rising from 0 at u=0 to 1 at u=1, ``order`` flat derivatives at each end."""
    u = np.clip(u, 0.0, 1.0)
    n = order
    s = sum(math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-u) ** k for k in range(n + 1))
    return s * u ** (n + 1)


def gamma_subtracted_trapezoid(n: int) -> float:
    """Offset tensor trapezoid on the periodic cell after removing the ``1/(2|k|²)`` pole.

    The subtracted term ``w(|k|)/(2|k|²)`` uses a radial cutoff ``w`` that is 1
    at the origin and vanishes smoothly at ``|k| = π``; its integral is exactly
    ``π·r_c·∫w = π²/2``. The remainder has a bounded, direction-dependent value
    at ``k = 0``, giving an ``O(h³)`` error.
    """
    if n % 2:
        raise ValueError("grid size must be even")
    h = 2.0 * np.pi / n
    k = -np.pi + h * (np.arange(n) + 0.5)
    k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij", sparse=True)
    r2 = k1 ** 2 + k2 ** 2 + k3 ** 2
    w = 1.0 - _smoothstep(np.sqrt(r2) / np.pi)
    remainder = _gamma_integrand(k1, k2, k3) - w / (2.0 * r2)
    # ∫ w(r)/(2r²) d³k = 2π ∫_0^π w dr = 2π · π/2   (∫ smoothstep over [0,1] is 1/2)
    ball = np.pi ** 2
    return float(remainder.mean() + ball / (2.0 * np.pi) ** 3)


def gamma_method_a(n: int = 128) -> float:
    """Subtracted trapezoid at grids ``n/2`` and ``n`` with ``h³`` Richardson extrapolation."""
    coarse = gamma_subtracted_trapezoid(n // 2)
    fine = gamma_subtracted_trapezoid(n)
    return (8.0 * fine - coarse) / 7.0


def gamma_method_b(order: int = 24, panels: int = 4) -> float:
    """Pyramid (Duffy) map of the corner singularity plus graded Gauss-Legendre panels.

    By symmetry the integral is 48 copies of the simplex ``0 ≤ k3 ≤ k2 ≤ k1 ≤ π``,
    i.e. 24 copies of ``{k1 = t, k2 = t u, k3 = t v}`` with ``u, v ∈ [0, 1]``.
    The Jacobian ``t²`` cancels the pole, leaving a smooth integrand; panels in
    ``t`` are refined geometrically toward the origin.
    """
    x, wts = leggauss(order)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * wts
    uu, vv = np.meshgrid(u, u, indexing="ij")
    wuv = np.outer(wu, wu)
    edges = [0.0] + [np.pi * 2.0 ** (-j) for j in range(panels - 1, -1, -1)]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = a + (b - a) * u
        wt = (b - a) * wu
        vals = t[:, None, None] ** 2 * _gamma_integrand(t[:, None, None], t[:, None, None] * uu, t[:, None, None] * vv)
        total += float(np.einsum("i,jk,ijk->", wt, wuv, vals))
    return 24.0 * total / (2.0 * np.pi) ** 3


def watson_gamma(tolerance: float = 1e-8) -> GammaResult:
    """γ by two independent quadratures; raises if they disagree beyond ``tolerance`` (relative)."""
    if not 0 < tolerance <= 1e-3:
        raise ValueError("tolerance must lie in (0, 1e-3]")
    a = gamma_method_a(128)
    b_lo = gamma_method_b(16, 3)
    b = gamma_method_b(32, 5)
    if abs(b - b_lo) > tolerance * abs(b):
        raise QuadratureError(f"graded Gauss-Legendre not converged: {b_lo!r} vs {b!r}")
    err = abs(a - b)
    if err > tolerance * abs(b):
        raise QuadratureError(f"gamma estimates disagree: trapezoid={a!r} pyramid={b!r}")
    return GammaResult(gamma=b, err=err, method_a=a, method_b=b)


@lru_cache(maxsize=1)
def gamma_value() -> float:
    return watson_gamma(1e-9).gamma


# ---------------------------------------------------------------------------
# scattering length


@dataclass(frozen=True)
class ScatteringParams:
    """Coupling, γ and scattering length. ``g = math.inf`` is the hard-core case."""

    g: float
    gamma: float
    a: float

    @property
    def hardcore(self) -> bool:
        return math.isinf(self.g)

    @property
    def half_g_phi0(self) -> float:
        """``½ g φ(0)``, including its finite limit ``1/(2γ)`` at ``g = ∞``."""
        if self.hardcore:
            return 1.0 / (2.0 * self.gamma)
        return 0.5 * self.g / (self.g * self.gamma + 1.0)


def scattering_length(g: float, gamma: float | None = None) -> float:
    """``a = g / (8π(gγ + 1))``, and ``1/(8πγ)`` for ``g = ∞``."""
    if gamma is None:
        gamma = gamma_value()
    if math.isnan(g) or g < 0:
        raise ValueError("coupling must be nonnegative")
    if math.isinf(g):
        return 1.0 / (8.0 * math.pi * gamma)
    return g / (8.0 * math.pi * (g * gamma + 1.0))


def scattering_params(g: float, gamma: float | None = None) -> ScatteringParams:
    if gamma is None:
        gamma = gamma_value()
    return ScatteringParams(float(g), gamma, scattering_length(g, gamma))


# ---------------------------------------------------------------------------
# lattice Green's function  G(x) = (2π)^-3 ∫ e^{ip·x} / E(p) dp
#
# Written as the heat-kernel integral G(x) = ∫_0^∞ Π_i ive(x_i, 2t) dt. The slow
# t^{-3/2} tail is removed by subtracting the continuum kernel (4πt)^{-3/2}
# exp(-|x|²/4t) beyond a split point T, whose integral is erf(...)/(4π|x|).


def _kernel(x, t):
    return ive(x[0], 2.0 * t) * ive(x[1], 2.0 * t) * ive(x[2], 2.0 * t)


def _continuum_kernel(r2, t):
    return (4.0 * np.pi * t) ** -1.5 * np.exp(-r2 / (4.0 * t))


def green_function(x, limit: int = 500) -> tuple[float, float]:
    """``G(x)`` and an absolute error estimate."""
    x = tuple(abs(int(v)) for v in x)
    r2 = float(sum(v * v for v in x))
    r = math.sqrt(r2)
    split = max(50.0, 4.0 * r2)
    head, e1 = integrate.quad(lambda t: _kernel(x, t), 0.0, split, epsabs=1e-15, epsrel=1e-13, limit=limit)
    tail, e2 = integrate.quad(
        lambda t: _kernel(x, t) - _continuum_kernel(r2, t), split, np.inf, epsabs=1e-16, epsrel=1e-12, limit=limit
    )
    if r > 0:
        cont = erf(r / (2.0 * math.sqrt(split))) / (4.0 * math.pi * r)
    else:
        cont = 1.0 / (4.0 * math.pi ** 1.5 * math.sqrt(split))
    return head + tail + cont, e1 + e2


@lru_cache(maxsize=8)
def _green_table(r_max: int, limit: int) -> tuple[np.ndarray, float]:
    n = 2 * r_max + 1
    vals = np.empty((n, n, n))
    err = 0.0
    cache: dict[tuple[int, int, int], float] = {}
    rng = np.arange(-r_max, r_max + 1)
    for i, a in enumerate(rng):
        for j, b in enumerate(rng):
            for k, c in enumerate(rng):
                key = tuple(sorted((abs(a), abs(b), abs(c)), reverse=True))
                if key not in cache:
                    v, e = green_function(key, limit)
                    cache[key] = v
                    err = max(err, e)
                vals[i, j, k] = cache[key]
    vals.flags.writeable = False
    return vals, err


# ---------------------------------------------------------------------------
# zero-energy solution


@dataclass(frozen=True)
class ZeroEnergySolution:
    params: ScatteringParams
    table: LatticeField
    r_max: int
    tail_coefficient: float
    max_error: float = field(default=0.0)

    def phi(self, x) -> float:
        return float(self.table(tuple(x)))


PHI_MAGIC = b"PHIT"
PHI_VERSION = 1
_HEADER = struct.Struct("<4sIB3xdiidd")


def _cache_path(cache_dir, params: ScatteringParams, r_max: int, grid: int) -> Path:
    gtag = "inf" if params.hardcore else repr(float(params.g))
    return Path(cache_dir) / f"phi_g{gtag}_r{r_max}_n{grid}.bin"


def write_phi_cache(path, sol: ZeroEnergySolution, grid: int) -> None:
    """Header (magic, version, g-flag, g, r_max, grid, γ, a) then little-endian float64 values."""
    p = sol.params
    header = _HEADER.pack(PHI_MAGIC, PHI_VERSION, int(p.hardcore), p.g, sol.r_max, grid, p.gamma, p.a)
    data = np.ascontiguousarray(sol.table.values, dtype="<f8").tobytes()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(header + data)
    os.replace(tmp, path)


def read_phi_cache(path) -> tuple[ScatteringParams, int, int, np.ndarray]:
    raw = Path(path).read_bytes()
    magic, version, hard, g, r_max, grid, gamma, a = _HEADER.unpack_from(raw)
    if magic != PHI_MAGIC or version != PHI_VERSION:
        raise ValueError(f"{path}: not a phi table (magic={magic!r}, version={version})")
    n = 2 * r_max + 1
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != n ** 3:
        raise ValueError(f"{path}: truncated table")
    params = ScatteringParams(math.inf if hard else g, gamma, a)
    return params, r_max, grid, vals.reshape(n, n, n).astype(float)


def phi_table(
    params: ScatteringParams,
    r_max: int,
    grid: int = 500,
    tol: float = 1e-10,
    cache_dir=None,
) -> ZeroEnergySolution:
    """φ(x) = 1 - 4πa G(x) on ``A(r_max)``.

    ``grid`` caps the number of adaptive subintervals per Green's-function
    quadrature; :class:`QuadratureError` is raised if the per-point error
    estimate exceeds ``tol``.
    """
    if r_max < 2:
        raise ValueError("r_max must be at least 2")
    if cache_dir is None:
        cache_dir = os.environ.get("HUBBARDLAB_CACHE")
    if cache_dir is not None:
        path = _cache_path(cache_dir, params, r_max, grid)
        if path.exists():
            cp, cr, cg, vals = read_phi_cache(path)
            if cp == params and cr == r_max and cg == grid:
                table = LatticeField(vals, (-r_max,) * 3)
                return ZeroEnergySolution(params, table, r_max, _fit_tail(table, params, r_max), 0.0)

    if params.a == 0.0:
        vals = np.ones((2 * r_max + 1,) * 3)
        err = 0.0
    else:
        green, err = _green_table(r_max, grid)
        err *= 4.0 * math.pi * params.a
        if err > tol:
            raise QuadratureError(f"per-point error {err:.3g} exceeds {tol:.3g}; raise grid")
        vals = 1.0 - 4.0 * math.pi * params.a * green
    table = LatticeField(vals, (-r_max,) * 3)
    sol = ZeroEnergySolution(params, table, r_max, _fit_tail(table, params, r_max), err)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        write_phi_cache(_cache_path(cache_dir, params, r_max, grid), sol, grid)
    return sol


def _far_points(r_max: int, lo: float, hi: float):
    pts = BoxRegion.cube(r_max).points()
    r = np.linalg.norm(pts, axis=1)
    sel = (r >= lo) & (r <= hi)
    return pts[sel], r[sel]


def _fit_tail(table: LatticeField, params: ScatteringParams, r_max: int) -> float:
    """Least-squares ``|x|(1-φ) ≈ a + c/|x|²`` over ``r_max/2 ≤ |x| ≤ r_max - 1``."""
    if params.a == 0.0:
        return 0.0
    pts, r = _far_points(r_max, r_max / 2.0, r_max - 1.0)
    phi = np.array([table(tuple(p)) for p in pts])
    y = r * (1.0 - phi)
    design = np.stack([np.ones_like(r), r ** -2], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# identities


def sq_residual(sol: ZeroEnergySolution) -> np.ndarray:
    """``|-Δφ(x) + ½gδ_{0,x}φ(x)|`` on ``A(r_max - 1)`` (hard core uses the finite limit of ½gφ(0))."""
    lap = laplacian_apply(sol.table)
    inner_box = BoxRegion.cube(sol.r_max - 1)
    res = -lap.on_box(inner_box)
    c = sol.r_max - 1
    res[c, c, c] += sol.params.half_g_phi0 if sol.params.a else 0.0
    return np.abs(res)


def identity_ap(sol: ZeroEnergySolution, r: int | None = None) -> float:
    """``|Σ_{x∈A(r)} Δφ(x) - 4πa|`` with ``r = r_max - 1`` by default.

    Summing the interior Laplacian telescopes to the outward flux through ∂A(r).
    """
    if r is None:
        r = sol.r_max - 1
    lap = laplacian_apply(sol.table).on_box(BoxRegion.cube(r))
    return abs(float(lap.sum()) - 4.0 * math.pi * sol.params.a)


def identity_ap2(sol: ZeroEnergySolution, r: int) -> float:
    """Outward flux ``Σ_{x∈A(r), y∉A(r), |x-y|=1} (φ(y) - φ(x))``."""
    if not 1 <= r <= sol.r_max - 1:
        raise ValueError("need 1 <= r <= r_max - 1")
    return float(sum(sol.table(y) - sol.table(x) for x, y in boundary_links(BoxRegion.cube(r))))


@dataclass(frozen=True)
class DecayReport:
    bound: float
    shell_maxima: dict[int, float]
    bounded: bool
    axis_ratio: float
    diagonal_ratio: float
    fitted_a: float
    fitted_rel_error: float


def verify_decay(sol: ZeroEnergySolution) -> DecayReport:
    """Measure ``|x|³ |φ(x) - 1 + a/|x||`` on ``4 ≤ |x| ≤ r_max - 1`` and the ``a/|x|`` tail.

    ``bounded`` means the outer shells never exceed the inner maximum; the
    ratios are ``|x|(1-φ)/a`` at ``|x| ≈ r_max/2`` along an axis and the
    body diagonal.
    """
    if sol.r_max < 8:
        raise ValueError("r_max must be at least 8")
    a = sol.params.a
    pts, r = _far_points(sol.r_max, 4.0, sol.r_max - 1.0)
    phi = np.array([sol.table(tuple(p)) for p in pts])
    dev = r ** 3 * np.abs(phi - 1.0 + a / r)
    shells: dict[int, float] = {}
    for s in range(4, sol.r_max):
        sel = (r >= s) & (r < s + 1)
        if sel.any():
            shells[s] = float(dev[sel].max())
    vals = list(shells.values())
    half = len(vals) // 2
    bounded = max(vals[half:]) <= max(vals[:half]) * (1 + 1e-12) + 1e-300
    if a == 0:
        return DecayReport(0.0, shells, True, 1.0, 1.0, 0.0, 0.0)
    k = sol.r_max // 2
    d = max(1, round(sol.r_max / (2.0 * math.sqrt(3.0))))
    axis_ratio = k * (1.0 - sol.phi((k, 0, 0))) / a
    diag_ratio = d * math.sqrt(3.0) * (1.0 - sol.phi((d, d, d))) / a
    return DecayReport(
        bound=float(dev.max()),
        shell_maxima=shells,
        bounded=bool(bounded),
        axis_ratio=float(axis_ratio),
        diagonal_ratio=float(diag_ratio),
        fitted_a=sol.tail_coefficient,
        fitted_rel_error=abs(sol.tail_coefficient - a) / a,
    )
