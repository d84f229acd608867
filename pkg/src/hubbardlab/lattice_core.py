"""Fields on Z^3 and on periodic boxes, difference operators, Fourier machinery.

A :class:`LatticeField` stores values densely over a rectangular support box.
Non-periodic fields are zero outside that box; periodic fields cover exactly one
period ``[0, period)^3`` and stand in for Z^3.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.signal

Point = tuple[int, int, int]

UNIT_VECTORS: tuple[Point, ...] = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box ``[lo, hi]`` (inclusive on both ends) in Z^3."""

    lo: Point
    hi: Point

    def __post_init__(self):
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo}..{self.hi}")

    @classmethod
    def cube(cls, r: int, center: Sequence[int] = (0, 0, 0)) -> "BoxRegion":
        """The cube A(r) = center + [-r, r]^3."""
        if r < 0:
            raise ValueError("cube radius must be nonnegative")
        c = tuple(int(v) for v in center)
        return cls(tuple(v - r for v in c), tuple(v + r for v in c))

    @classmethod
    def axis_box(cls, lo: int, hi: int) -> "BoxRegion":
        return cls((lo,) * 3, (hi,) * 3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def contains(self, x: Sequence[int]) -> bool:
        return all(l <= v <= h for l, v, h in zip(self.lo, x, self.hi))

    def points(self) -> np.ndarray:
        """All points as an ``(n, 3)`` integer array in lexicographic order."""
        axes = [np.arange(l, h + 1) for l, h in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def grown(self, k: int = 1) -> "BoxRegion":
        return BoxRegion(tuple(v - k for v in self.lo), tuple(v + k for v in self.hi))


@dataclass(frozen=True)
class LatticeField:
    """Values on the box ``origin + [0, shape)``; zero elsewhere unless periodic.

    For periodic fields ``origin`` is ``(0, 0, 0)`` and the array shape is the
    period along each axis.
    """

    values: np.ndarray
    origin: Point = (0, 0, 0)
    periodic: bool = False

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("lattice fields are three dimensional")
        if self.periodic and tuple(self.origin) != (0, 0, 0):
            raise ValueError("periodic fields must have origin (0, 0, 0)")
        view = self.values.view()
        view.flags.writeable = False
        object.__setattr__(self, "values", view)

    # constructors ---------------------------------------------------------

    @classmethod
    def zeros(cls, box: BoxRegion, dtype=float) -> "LatticeField":
        return cls(np.zeros(box.shape, dtype=dtype), box.lo)

    @classmethod
    def delta(cls, x: Point = (0, 0, 0), period: int | None = None) -> "LatticeField":
        if period is None:
            return cls(np.ones((1, 1, 1)), tuple(x))
        v = np.zeros((period,) * 3)
        v[tuple(np.mod(x, period))] = 1.0
        return cls(v, periodic=True)

    @classmethod
    def from_function(cls, box: BoxRegion, func) -> "LatticeField":
        pts = box.points()
        vals = np.asarray(func(pts)).reshape(box.shape)
        return cls(vals, box.lo)

    @classmethod
    def on_periodic(cls, values: np.ndarray) -> "LatticeField":
        if len(set(values.shape)) != 1:
            raise ValueError("periodic boxes must be cubic")
        return cls(np.asarray(values), periodic=True)

    # accessors ------------------------------------------------------------

    @property
    def period(self) -> int | None:
        return self.values.shape[0] if self.periodic else None

    @property
    def box(self) -> BoxRegion:
        hi = tuple(o + s - 1 for o, s in zip(self.origin, self.values.shape))
        return BoxRegion(tuple(self.origin), hi)

    def __call__(self, x: Sequence[int]):
        if self.periodic:
            return self.values[tuple(np.mod(x, self.period))]
        idx = tuple(v - o for v, o in zip(x, self.origin))
        if all(0 <= i < s for i, s in zip(idx, self.values.shape)):
            return self.values[idx]
        return 0.0 * self.values.flat[0]

    def on_box(self, box: BoxRegion) -> np.ndarray:
        """Dense copy of the field restricted (or zero-extended) to ``box``."""
        if self.periodic:
            axes = [np.mod(np.arange(l, h + 1), self.period) for l, h in zip(box.lo, box.hi)]
            return self.values[np.ix_(*axes)].copy()
        out = np.zeros(box.shape, dtype=self.values.dtype)
        src, dst = [], []
        for o, s, l, h in zip(self.origin, self.values.shape, box.lo, box.hi):
            a, b = max(o, l), min(o + s - 1, h)
            if a > b:
                return out
            src.append(slice(a - o, b - o + 1))
            dst.append(slice(a - l, b - l + 1))
        out[tuple(dst)] = self.values[tuple(src)]
        return out

    def extended(self, k: int = 1) -> "LatticeField":
        """Same field with the stored support grown by ``k`` shells of zeros."""
        if self.periodic:
            return self
        return LatticeField(np.pad(self.values, k), tuple(o - k for o in self.origin))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def total(self):
        return self.values.sum()


def inner(f: LatticeField, g: LatticeField):
    """``<f|g> = sum_x conj(f(x)) g(x)``."""
    if f.periodic or g.periodic:
        _check_same_period(f, g)
        return np.vdot(f.values, g.values)
    box = _union_box(f.box, g.box)
    return np.vdot(f.on_box(box), g.on_box(box))


def _union_box(a: BoxRegion, b: BoxRegion) -> BoxRegion:
    return BoxRegion(tuple(map(min, a.lo, b.lo)), tuple(map(max, a.hi, b.hi)))


def _check_same_period(f: LatticeField, g: LatticeField):
    if not (f.periodic and g.periodic and f.period == g.period):
        raise ValueError("mixing periodic and non-periodic fields or periods")


def _shift(f: LatticeField, e: Sequence[int]) -> LatticeField:
    """Return ``x -> f(x + e)``."""
    if f.periodic:
        return LatticeField(np.roll(f.values, tuple(-v for v in e), axis=(0, 1, 2)), periodic=True)
    return LatticeField(f.values, tuple(o - v for o, v in zip(f.origin, e)))


def _add(*terms: tuple[float, LatticeField]) -> LatticeField:
    if terms[0][1].periodic:
        vals = sum(c * t.values for c, t in terms)
        return LatticeField(vals, periodic=True)
    box = terms[0][1].box
    for _, t in terms[1:]:
        box = _union_box(box, t.box)
    vals = sum(c * t.on_box(box) for c, t in terms)
    return LatticeField(vals, box.lo)


def _mask(f: LatticeField, region: BoxRegion) -> LatticeField:
    """Multiply by the indicator of ``region`` (wrapped when periodic)."""
    if f.periodic:
        theta = indicator(region, f.period)
        return LatticeField(f.values * theta, periodic=True)
    box = f.box
    inside = np.zeros(box.shape, dtype=bool)
    sl = []
    for o, s, l, h in zip(box.lo, box.shape, region.lo, region.hi):
        a, b = max(o, l), min(o + s - 1, h)
        if a > b:
            return LatticeField(np.zeros_like(f.values), f.origin)
        sl.append(slice(a - o, b - o + 1))
    inside[tuple(sl)] = True
    return LatticeField(f.values * inside, f.origin)


def indicator(region: BoxRegion, period: int) -> np.ndarray:
    """theta_A on the periodic box of side ``period``."""
    if any(s > period for s in region.shape):
        raise ValueError("region does not fit in the periodic box")
    theta = np.zeros((period,) * 3)
    axes = [np.mod(np.arange(l, h + 1), period) for l, h in zip(region.lo, region.hi)]
    theta[np.ix_(*axes)] = 1.0
    return theta


# difference operators ------------------------------------------------------


def laplacian_apply(f: LatticeField) -> LatticeField:
    """``(Δf)(x) = sum_{|y-x|=1} (f(y) - f(x))``."""
    g = f.extended(1)
    terms = [(-6.0, g)]
    for e in UNIT_VECTORS:
        terms.append((1.0, _shift(g, e)))
        terms.append((1.0, _shift(g, tuple(-v for v in e))))
    return _restrict_like(_add(*terms), g)


def _restrict_like(f: LatticeField, like: LatticeField) -> LatticeField:
    if f.periodic:
        return f
    return LatticeField(f.on_box(like.box), like.origin)


def gradient_apply(f: LatticeField, adjoint: bool = False) -> list[LatticeField]:
    """Forward differences ``f(x+e_i) - f(x)``, or ``f(x-e_i) - f(x)`` for the adjoint."""
    g = f.extended(1)
    sign = -1 if adjoint else 1
    out = []
    for e in UNIT_VECTORS:
        shifted = _shift(g, tuple(sign * v for v in e))
        out.append(_restrict_like(_add((1.0, shifted), (-1.0, g)), g))
    return out


def divergence(components: Sequence[LatticeField], adjoint: bool = True) -> LatticeField:
    """``sum_i (∇^i)^† F_i`` (default) or ``sum_i ∇^i F_i``."""
    parts = [gradient_apply(c, adjoint=adjoint)[i] for i, c in enumerate(components)]
    return _add(*[(1.0, p) for p in parts])


def neumann_form_apply(region: BoxRegion, f: LatticeField) -> LatticeField:
    """``[∇^† θ_A ∇]_s f = ½ (∇^†·θ_A ∇ + ∇·θ_A ∇^†) f``."""
    fwd = [_mask(c, region) for c in gradient_apply(f)]
    bwd = [_mask(c, region) for c in gradient_apply(f, adjoint=True)]
    a = divergence(fwd, adjoint=True)
    b = divergence(bwd, adjoint=False)
    return _add((0.5, a), (0.5, b))


def dt_apply(region: BoxRegion, f: LatticeField, g: LatticeField):
    """``<f| [∇^†θ_A∇]_s + θ_A Δ |g>`` and the boundary double sum it equals.

    Returns ``(operator_value, boundary_value)``; the two are computed along
    independent routes.
    """
    op = _add((1.0, neumann_form_apply(region, g)), (1.0, _mask(laplacian_apply(g), region)))
    operator_value = inner(f, op)

    # boundary sum ½ Σ_{x∈A, y∉A, |x-y|=1} [f(x)+f(y)] [g(y)-g(x)]
    boundary_value = 0.0
    for x, y in boundary_links(region, f.period if f.periodic else None):
        boundary_value += 0.5 * np.conj(f(x) + f(y)) * (g(y) - g(x))
    return operator_value, boundary_value


def _wrapped_in(y, region: BoxRegion, period: int) -> bool:
    return all(((v - l) % period) <= (h - l) for v, l, h in zip(y, region.lo, region.hi))


def _surface_points(region: BoxRegion):
    for x in region.points():
        x = tuple(int(v) for v in x)
        if any(v in (l, h) for v, l, h in zip(x, region.lo, region.hi)):
            yield x


def boundary_links(region: BoxRegion, period: int | None = None):
    """Pairs ``(x, y)`` with ``x`` in ``region``, ``y`` outside and ``|x-y| = 1``."""
    for x in _surface_points(region):
        for e in UNIT_VECTORS:
            for s in (1, -1):
                y = (x[0] + s * e[0], x[1] + s * e[1], x[2] + s * e[2])
                inside = region.contains(y) if period is None else _wrapped_in(y, region, period)
                if not inside:
                    yield x, y


# Fourier analysis ----------------------------------------------------------


@dataclass(frozen=True)
class SpectralGrid:
    """Transform values ``ψ̂(p)`` at ``p = 2πm/Λ`` in numpy FFT ordering."""

    period: int
    values: np.ndarray = field(repr=False)

    def momenta(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Momentum components folded into ``[-π, π)``, broadcastable."""
        return momentum_grid(self.period)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2)) / self.period ** 3


def momentum_grid(period: int, sparse: bool = True):
    k = 2.0 * np.pi * np.fft.fftfreq(period)
    return np.meshgrid(k, k, k, indexing="ij", sparse=sparse)


def dft(f, inverse: bool = False):
    """``ψ̂(p) = Σ_x e^{-ip·x} ψ(x)`` on the periodic box, or its inverse.

    ``dft(field)`` returns a :class:`SpectralGrid`; ``dft(grid, inverse=True)``
    returns the periodic :class:`LatticeField`.
    """
    if inverse:
        if not isinstance(f, SpectralGrid):
            raise TypeError("inverse transform expects a SpectralGrid")
        if f.period <= 0:
            raise ValueError("period must be positive")
        vals = np.fft.ifftn(f.values)
        return LatticeField(vals, periodic=True)
    if not isinstance(f, LatticeField) or not f.periodic:
        raise TypeError("forward transform expects a periodic LatticeField")
    if f.period <= 0:
        raise ValueError("period must be positive")
    return SpectralGrid(f.period, np.fft.fftn(f.values))


def periodize(f: LatticeField, period: int) -> LatticeField:
    """Fold a finitely supported field onto the periodic box (sums images)."""
    if period <= 0:
        raise ValueError("period must be positive")
    if f.periodic:
        if f.period != period:
            raise ValueError("field already has a different period")
        return f
    out = np.zeros((period,) * 3, dtype=f.values.dtype)
    axes = [np.mod(np.arange(o, o + s), period) for o, s in zip(f.origin, f.values.shape)]
    np.add.at(out, np.ix_(*axes), f.values)
    return LatticeField(out, periodic=True)


def reflect_conj(h: LatticeField) -> LatticeField:
    """Kernel of the adjoint convolution: ``x -> conj(h(-x))``."""
    if h.periodic:
        v = np.roll(np.flip(h.values, axis=(0, 1, 2)), 1, axis=(0, 1, 2))
        return LatticeField(np.conj(v), periodic=True)
    hi = tuple(o + s - 1 for o, s in zip(h.origin, h.values.shape))
    return LatticeField(np.conj(np.flip(h.values, axis=(0, 1, 2))), tuple(-v for v in hi))


def convolve(h: LatticeField, f: LatticeField, adjoint: bool = False, method: str = "auto") -> LatticeField:
    """``(C_h f)(x) = Σ_y h(x-y) f(y)``; ``adjoint`` uses ``conj(h(-x))``.

    Non-periodic inputs are convolved exactly by direct summation. Periodic
    inputs use the FFT unless ``method='direct'``.
    """
    if adjoint:
        h = reflect_conj(h)
    if f.periodic or h.periodic:
        per = f.period if f.periodic else h.period
        hp, fp = periodize(h, per), periodize(f, per)
        if method == "direct":
            return LatticeField(_circular_direct(hp.values, fp.values), periodic=True)
        vals = np.fft.ifftn(np.fft.fftn(hp.values) * np.fft.fftn(fp.values))
        if np.isrealobj(hp.values) and np.isrealobj(fp.values):
            vals = vals.real
        return LatticeField(vals, periodic=True)
    vals = scipy.signal.convolve(h.values, f.values, mode="full", method="direct")
    origin = tuple(a + b for a, b in zip(h.origin, f.origin))
    return LatticeField(vals, origin)


def _circular_direct(h: np.ndarray, f: np.ndarray) -> np.ndarray:
    out = np.zeros(h.shape, dtype=np.result_type(h, f))
    for idx in zip(*np.nonzero(h)):
        out += h[idx] * np.roll(f, idx, axis=(0, 1, 2))
    return out


def dispersion(p) -> np.ndarray:
    """``E(p) = 2 Σ_i (1 - cos p^i)``; accepts a triple or an ``(..., 3)`` array."""
    p = np.asarray(p, dtype=float)
    return 2.0 * np.sum(1.0 - np.cos(p), axis=-1)


def dispersion_grid(period: int) -> np.ndarray:
    """``E(p)`` on the full momentum grid of the periodic box."""
    k = 2.0 * np.pi * np.fft.fftfreq(period)
    e1 = 2.0 * (1.0 - np.cos(k))
    return e1[:, None, None] + e1[None, :, None] + e1[None, None, :]


def kinetic_energy(f: LatticeField) -> float:
    """``<f|-Δ|f>`` by direct stencil summation."""
    return float(np.real(-inner(f, laplacian_apply(f))))
