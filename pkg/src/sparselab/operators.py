"""Discretized convolution-type singular integrals and their truncations.

Kernels are sampled at exact cell-centre offsets.  A truncation
``T_{eps, delta}`` sums over offsets with ``eps < |z| <= delta`` and
subtracts the discrete mass of that annulus at the centre, so that

    T_{eps, delta} f(x) = sum_z K(z) (f(x - z) - f(x)) h^d.

For kernels whose lattice sums cancel by symmetry (odd kernels, ``Omega``
with odd angular frequency) the correction is zero; for the others it is the
discrete counterpart of the mean-zero condition.  Half-open annuli make
truncations exactly additive: ``T_{a,b} + T_{b,c} = T_{a,c}``.

All sums are free-space (non-wrapped): ``f`` is treated as zero outside the
grid domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .dyadic import DyadicCube
from .errors import InvalidInput, ResolutionError
from .grid import Grid, GridFunction
from .maximal import (DEFAULT_RHO, hl_maximal, m_delta, radius_ladder,
                      truncated_centered_maximal)

__all__ = [
    "ModulusOfContinuity",
    "RoughHomogeneous",
    "SmoothCZ",
    "RadiiSet",
    "TruncationLadder",
    "get_kernel",
    "parse_kernel_spec",
    "truncated_apply",
    "maximal_truncation",
    "localized_maximal_truncation",
    "hl_maximal",
    "truncated_centered_maximal",
    "m_delta",
    "continuity_lemma_check",
    "beurling_omega",
    "beurling_multiplier_apply",
    "pin_beurling_orientation",
    "beurling_truncation_study",
    "weak11_ratio",
    "cotlar_check",
    "boundary_distance",
    "standard_test_set",
]


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class ModulusOfContinuity:
    """Increasing subadditive ``omega`` with ``omega(0) = 0``."""

    omega_fn: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    dini_exact: float | None = None

    def __call__(self, t):
        return self.omega_fn(np.asarray(t, dtype=float))

    @property
    def dini_norm(self) -> float:
        """``int_0^1 omega(t) dt / t``: the closed form when known, else
        adaptive quadrature (which cannot see ``t < e**-745``)."""
        if self.dini_exact is not None:
            if not math.isfinite(self.dini_exact):
                raise InvalidInput("modulus is not Dini")
            return self.dini_exact
        # t = e^u keeps slowly decaying moduli accurate near 0
        val, err = integrate.quad(lambda u: float(self(math.exp(u))), -np.inf, 0.0,
                                  limit=200)
        if not np.isfinite(val):
            raise InvalidInput("modulus is not Dini")
        return val

    def check(self, samples: int = 2001) -> bool:
        t = np.linspace(0.0, 4.0, samples)
        w = self(t)
        if abs(float(self(0.0))) > 0:
            return False
        if np.any(np.diff(w) < -1e-14):
            return False
        s = t[:, None] + t[None, ::50]
        sub = self(s) <= self(t)[:, None] + self(t[::50])[None, :] + 1e-12
        return bool(np.all(sub))


def linear_modulus(c: float) -> ModulusOfContinuity:
    return ModulusOfContinuity(lambda t: c * t, f"linear:{c!r}")


def log_modulus(c: float, gamma: float) -> ModulusOfContinuity:
    """``c / (1 + log(1/t))**gamma`` for ``t <= e**-gamma`` and its tangent
    line beyond, which keeps the modulus concave and hence subadditive.

    Dini iff ``gamma > 1``.
    """
    t0 = math.exp(-gamma)
    w0 = c * (1.0 + gamma) ** (-gamma)
    slope = c * gamma * (1.0 + gamma) ** (-gamma - 1) / t0

    def fn(t):
        t = np.asarray(t, dtype=float)
        tt = np.clip(t, 1e-300, t0)
        with np.errstate(divide="ignore"):
            v = c / (1.0 + np.log(1.0 / tt)) ** gamma
        v = np.where(t > t0, w0 + slope * (t - t0), v)
        return np.where(t > 0, v, 0.0)

    # int_0^t0 = c (1+gamma)^(1-gamma)/(gamma-1); the tangent part is elementary
    dini = math.inf if gamma <= 1 else (
        c * (1.0 + gamma) ** (1.0 - gamma) / (gamma - 1.0)
        + (w0 - slope * t0) * gamma + slope * (1.0 - t0))
    return ModulusOfContinuity(fn, f"log:{c!r}:{gamma!r}", dini)


class _KernelBase:
    d: int
    name: str
    l2_norm: float | None

    def evaluate(self, z: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    @property
    def is_complex(self) -> bool:
        probe = np.eye(self.d)[:1] + 0.3
        return bool(np.iscomplexobj(self.evaluate(probe)))


@dataclass(frozen=True, eq=False)
class RoughHomogeneous(_KernelBase):
    """``Omega(z/|z|) / |z|**d`` with bounded mean-zero ``Omega``.

    ``omega_fn`` maps an array of unit vectors ``(..., d)`` to values.
    """

    d: int
    omega_fn: Callable[[np.ndarray], np.ndarray]
    omega_sup: float
    name: str = "rough"
    l2_norm: float | None = None

    def evaluate(self, z):
        z = np.asarray(z, dtype=float)
        r = np.sqrt((z * z).sum(axis=-1))
        u = z / np.where(r > 0, r, 1.0)[..., None]
        return self.omega_fn(u) / np.where(r > 0, r, np.inf) ** self.d

    def sphere_samples(self, n: int = 4096):
        if self.d == 1:
            u = np.array([[1.0], [-1.0]])
            return u, np.array([1.0, 1.0])
        if self.d == 2:
            th = 2 * np.pi * np.arange(n) / n
            u = np.stack([np.cos(th), np.sin(th)], axis=-1)
            return u, np.full(n, 2 * np.pi / n)
        raise InvalidInput("sphere quadrature implemented for d = 1, 2")

    def mean_zero_error(self) -> float:
        u, wts = self.sphere_samples()
        return float(abs(np.sum(self.omega_fn(u) * wts)))

    def sup_check(self) -> bool:
        u, _ = self.sphere_samples()
        return bool(np.all(np.abs(self.omega_fn(u)) <= self.omega_sup * (1 + 1e-12)))


@dataclass(frozen=True, eq=False)
class SmoothCZ(_KernelBase):
    """Translation-invariant kernel with size constant and modulus."""

    d: int
    kernel_fn: Callable[[np.ndarray], np.ndarray]
    size_const: float
    modulus: ModulusOfContinuity
    name: str = "smooth"
    l2_norm: float | None = None

    def evaluate(self, z):
        z = np.asarray(z, dtype=float)
        r = np.sqrt((z * z).sum(axis=-1))
        out = self.kernel_fn(np.where(r[..., None] > 0, z, 1.0))
        return np.where(r > 0, out, 0.0)

    def size_check(self, z) -> bool:
        r = np.sqrt((np.asarray(z) ** 2).sum(axis=-1))
        return bool(np.all(np.abs(self.evaluate(z)) * r ** self.d
                           <= self.size_const * (1 + 1e-12)))

    @property
    def dini(self) -> float:
        return self.modulus.dini_norm

    @property
    def cz_constant(self) -> float:
        """``C_K + ||omega||_Dini`` (the norm part is measured separately)."""
        return self.size_const + self.dini


def _odd1d():
    # |K(x,y) - K(x',y)| + |K(y,x) - K(y,x')| <= 4 t / |x - y| for t <= 1/2
    return SmoothCZ(1, lambda z: 1.0 / z[..., 0], 1.0, linear_modulus(4.0),
                    "odd1d", l2_norm=math.pi)


def _hilbert():
    return SmoothCZ(1, lambda z: 1.0 / (math.pi * z[..., 0]), 1 / math.pi,
                    linear_modulus(4.0 / math.pi), "smooth-dini:hilbert", l2_norm=1.0)


def _riesz(j: int = 1):
    # |grad K| <= 1/(pi r^3) and r >= |x - y|/2 on the segment
    def fn(z):
        r = np.sqrt((z * z).sum(axis=-1))
        return z[..., j - 1] / (2 * math.pi * r ** 3)

    return SmoothCZ(2, fn, 1 / (2 * math.pi), linear_modulus(16.0 / math.pi),
                    f"smooth-dini:riesz{j}", l2_norm=1.0)


def _odd_log_dini(gamma: float = 2.0):
    """1D odd kernel ``(1 + 1/(1 + log(1 + 1/|z|))**gamma) / z``.

    The correction is smooth away from 0 and bounded by 1, so the size
    constant is 2; its modulus is dominated by ``4t + 4 t`` (the derivative
    of the bracket times ``|z|`` is at most ``gamma``).
    """
    def fn(z):
        x = z[..., 0]
        a = np.abs(x)
        return (1.0 + (1.0 + np.log1p(1.0 / a)) ** (-gamma)) / x

    return SmoothCZ(1, fn, 2.0, linear_modulus(8.0 + 4.0 * gamma),
                    f"smooth-dini:logodd{gamma:g}")


def beurling_omega(m: int) -> RoughHomogeneous:
    """``Omega_m(e^{i phi}) = ((-1)^m / pi) m e^{-2 i m phi}`` on the circle."""
    if m < 1:
        raise InvalidInput("m must be a positive integer")

    def om(u):
        return ((-1) ** m / math.pi) * m * (u[..., 0] - 1j * u[..., 1]) ** (2 * m)

    return RoughHomogeneous(2, om, m / math.pi, f"beurling:{m}", l2_norm=1.0)


def parse_kernel_spec(text: str) -> SmoothCZ:
    """Build a smooth kernel from a ``key=value`` description.

    Keys: ``kind`` (hilbert | riesz | logodd | odd1d), ``j`` (riesz
    component), ``gamma`` (logodd exponent).
    """
    from .calibration import parse

    cfg = parse(text)
    kind = cfg.get("kind")
    if kind == "hilbert":
        return _hilbert()
    if kind == "riesz":
        return _riesz(int(cfg.get("j", 1)))
    if kind == "logodd":
        return _odd_log_dini(float(cfg.get("gamma", 2.0)))
    if kind == "odd1d":
        return _odd1d()
    raise InvalidInput(f"unknown smooth kernel kind {kind!r}")


def get_kernel(name: str):
    """Registry lookup: ``odd1d``, ``beurling:m``, ``smooth-dini:<name|file>``."""
    if name == "odd1d":
        return _odd1d()
    if name.startswith("beurling:"):
        return beurling_omega(int(name.split(":", 1)[1]))
    if name.startswith("smooth-dini:"):
        arg = name.split(":", 1)[1]
        builtin = {"hilbert": _hilbert, "riesz1": lambda: _riesz(1),
                   "riesz2": lambda: _riesz(2), "logodd": _odd_log_dini}
        if arg in builtin:
            return builtin[arg]()
        try:
            with open(arg) as fh:
                return parse_kernel_spec(fh.read())
        except OSError as exc:
            raise InvalidInput(f"cannot read kernel spec {arg!r}: {exc}") from exc
    raise InvalidInput(f"unknown kernel {name!r}")


# ---------------------------------------------------------------------------
# radii


@dataclass(frozen=True)
class RadiiSet:
    """Strictly increasing truncation radii."""

    radii: tuple

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size < 1 or not np.all(r > 0) or np.any(np.diff(r) <= 0):
            raise InvalidInput("radii must be positive and strictly increasing")
        object.__setattr__(self, "radii", tuple(float(x) for x in r))

    @classmethod
    def ladder(cls, eps_min: float, rmax: float, rho: float = DEFAULT_RHO) -> "RadiiSet":
        return cls(tuple(radius_ladder(eps_min, rmax, rho)))

    @classmethod
    def for_grid(cls, grid: Grid, rho: float = DEFAULT_RHO) -> "RadiiSet":
        """Ladder from the cell diagonal to the domain diameter."""
        return cls.ladder(grid.cell_diagonal, grid.diameter, rho)

    def validate(self, grid: Grid) -> None:
        if self.radii[0] < grid.cell_diagonal * (1 - 1e-12):
            raise ResolutionError("smallest radius is below one cell diagonal")

    def with_outer(self, R: float) -> "RadiiSet":
        if R <= self.radii[-1]:
            return self
        return RadiiSet(self.radii + (float(R),))

    def __len__(self):
        return len(self.radii)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.radii)


# ---------------------------------------------------------------------------
# convolution machinery


def _offset_norms(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Physical offset vectors and norms on the ``(2n-1)**d`` stencil."""
    k = np.arange(-(grid.n - 1), grid.n) * grid.h
    mesh = np.meshgrid(*([k] * grid.d), indexing="ij")
    z = np.stack(mesh, axis=-1)
    return z, np.sqrt((z * z).sum(axis=-1))


class _Convolver:
    """Free-space convolution of one input with many stencils."""

    def __init__(self, f: GridFunction):
        self.grid = f.grid
        self.n = f.grid.n
        self.d = f.grid.d
        self.P = 2 * self.n
        vals = np.asarray(f.values)
        self.axes = tuple(range(self.d))
        self.fhat = np.fft.fftn(vals, s=(self.P,) * self.d, axes=self.axes)
        self.real_input = not np.iscomplexobj(vals)
        self.values = vals

    def apply(self, stencil: np.ndarray) -> np.ndarray:
        khat = np.fft.fftn(stencil, s=(self.P,) * self.d, axes=self.axes)
        full = np.fft.ifftn(self.fhat * khat, axes=self.axes)
        # output x_i sits at full index i + n - 1
        sl = tuple(slice(self.n - 1, 2 * self.n - 1) for _ in range(self.d))
        out = full[sl]
        if self.real_input and not np.iscomplexobj(stencil):
            out = out.real
        return out


class _LatticeMass:
    """Cumulative kernel mass ``sum_{0 < |z| <= r} K(z) h^d`` over the full
    lattice ``h Z^d`` (not clipped to the stencil)."""

    def __init__(self, kernel, grid: Grid, rmax: float):
        q = int(math.ceil(rmax / grid.h)) + 1
        k = np.arange(-q, q + 1) * grid.h
        z = np.stack(np.meshgrid(*([k] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
        r = np.sqrt((z * z).sum(axis=1))
        keep = (r > 0) & (r <= rmax * _SNAP * (1 + 1e-12))
        r, z = r[keep], z[keep]
        order = np.argsort(r, kind="stable")
        self.r = r[order]
        self.cum = np.concatenate([[0.0], np.cumsum(kernel.evaluate(z[order]) * grid.h ** grid.d)])

    def mass(self, eps: float, delta: float):
        i0 = np.searchsorted(self.r, eps, side="right")
        i1 = np.searchsorted(self.r, delta, side="right")
        return self.cum[i1] - self.cum[i0]


_SNAP = 1.0 + 1e-12


def _annulus_stencil(kvals: np.ndarray, r: np.ndarray, eps: float, delta: float,
                     h: float, d: int, lattice: _LatticeMass) -> np.ndarray:
    # snap radii so ladders built with different ratios agree on lattice points
    eps, delta = eps * _SNAP, delta * _SNAP
    mask = (r > eps) & (r <= delta)
    st = np.where(mask, kvals, 0.0) * h ** d
    centre = tuple(s // 2 for s in st.shape)
    st[centre] = -lattice.mass(eps, delta)
    return st


def truncated_apply(kernel, f: GridFunction, eps: float, delta: float) -> GridFunction:
    """``T_{eps, delta} f`` at every grid midpoint."""
    if not 0 < eps < delta:
        raise InvalidInput("need 0 < eps < delta")
    g = f.grid
    if kernel.d != g.d:
        raise InvalidInput("kernel/grid dimension mismatch")
    if eps < g.cell_diagonal * (1 - 1e-12):
        raise ResolutionError("eps below one cell diagonal")
    z, r = _offset_norms(g)
    kv = kernel.evaluate(z)
    st = _annulus_stencil(kv, r, eps, delta, g.h, g.d, _LatticeMass(kernel, g, delta))
    return GridFunction(g, _Convolver(f).apply(st))


class TruncationLadder:
    """Cumulative truncations ``C_i = T_{r_0, r_i} f`` over a radii set.

    Every supremum over ladder pairs reduces to ``C``:
    ``T_{r_a, r_b} f = C_b - C_a``.
    """

    def __init__(self, kernel, f: GridFunction, radii: RadiiSet | None = None):
        g = f.grid
        if kernel.d != g.d:
            raise InvalidInput("kernel/grid dimension mismatch")
        radii = RadiiSet.for_grid(g) if radii is None else radii
        radii.validate(g)
        radii = radii.with_outer(g.diameter)
        self.kernel, self.f, self.grid, self.radii = kernel, f, g, radii
        r_arr = radii.as_array()
        z, r = _offset_norms(g)
        kv = kernel.evaluate(z)
        conv = _Convolver(f)
        dtype = complex if (np.iscomplexobj(kv) or np.iscomplexobj(f.values)) else float
        C = np.zeros((len(r_arr),) + g.shape, dtype=dtype)
        lattice = _LatticeMass(kernel, g, r_arr[-1])
        for i in range(1, len(r_arr)):
            st = _annulus_stencil(kv, r, r_arr[i - 1], r_arr[i], g.h, g.d, lattice)
            if not np.any(st):
                C[i] = C[i - 1]
                continue
            C[i] = C[i - 1] + conv.apply(st)
        self.C = C
        self._prefix_diam = None

    @property
    def r(self) -> np.ndarray:
        return self.radii.as_array()

    def truncation(self, a: int, b: int) -> np.ndarray:
        return self.C[b] - self.C[a]

    @property
    def prefix_diameter(self) -> np.ndarray:
        """``D_i(x) = max_{a < b <= i} |C_b(x) - C_a(x)|``."""
        if self._prefix_diam is None:
            C = self.C
            if np.iscomplexobj(C):
                D = np.zeros(C.shape)
                for i in range(1, len(C)):
                    D[i] = np.maximum(D[i - 1], np.abs(C[i] - C[:i]).max(axis=0))
            else:
                D = np.maximum.accumulate(C, axis=0) - np.minimum.accumulate(C, axis=0)
            self._prefix_diam = D
        return self._prefix_diam

    def sharp(self) -> np.ndarray:
        """``T_sharp f = max_a |T_{r_a, R} f|`` with ``R`` the domain diameter."""
        return np.abs(self.C[-1][None] - self.C[:-1]).max(axis=0)

    def admissible_index(self, dist: np.ndarray) -> np.ndarray:
        """Largest ``i`` with ``r_i <= dist / 2`` (``-1`` if none)."""
        return np.searchsorted(self.r, dist / 2, side="right") - 1

    def localized(self, lower, upper) -> np.ndarray:
        """``T_{sharp, P} f`` for the box ``P = [lower, upper)``."""
        dist, inside = boundary_distance(self.grid, lower, upper)
        B = self.admissible_index(dist)
        D = self.prefix_diameter
        Bc = np.clip(B, 0, None)
        val = np.take_along_axis(D, Bc[None], axis=0)[0]
        return np.where(inside & (B >= 1), val, 0.0)


def boundary_distance(grid: Grid, lower, upper):
    """Distance of each midpoint to the boundary of the box and membership."""
    lower = [float(a) for a in lower]
    upper = [float(b) for b in upper]
    mesh = grid.mesh()
    dist = np.full(grid.shape, np.inf)
    inside = np.ones(grid.shape, dtype=bool)
    for x, a, b in zip(mesh, lower, upper):
        inside &= (x >= a) & (x < b)
        dist = np.minimum(dist, np.minimum(x - a, b - x))
    return np.where(inside, dist, 0.0), inside


def maximal_truncation(kernel, f: GridFunction, radii: RadiiSet | None = None) -> GridFunction:
    """``sup_{eps in radii} |T_{eps, R} f|`` with ``R`` the domain diameter."""
    return GridFunction(f.grid, TruncationLadder(kernel, f, radii).sharp())


def localized_maximal_truncation(kernel, f: GridFunction, p_cube: DyadicCube,
                                 radii: RadiiSet | None = None,
                                 ladder: TruncationLadder | None = None) -> GridFunction:
    """``T_{sharp, P} f``: ladder pairs with ``delta <= dist(x, boundary P)/2``,
    zero outside ``P``."""
    if ladder is None:
        ladder = TruncationLadder(kernel, f, radii)
    return GridFunction(f.grid, ladder.localized(p_cube.lower, p_cube.upper))


# ---------------------------------------------------------------------------
# Beurling transform


def _complex_frequency(grid: Grid) -> np.ndarray:
    fx, fy = grid.frequencies()
    return fx + 1j * fy


def beurling_multiplier_apply(m: int, f: GridFunction, orientation: str | None = None,
                              pad: int = 1) -> GridFunction:
    """Apply ``(conj(xi)/xi)**m`` on the (optionally zero-padded) periodic grid."""
    g = f.grid
    if g.d != 2:
        raise InvalidInput("the Beurling multiplier acts on 2D grids")
    if m < 0:
        raise InvalidInput("m must be nonnegative")
    if m == 0:
        return GridFunction(g, np.array(f.values, copy=True), f.periodic)
    if orientation is None:
        from . import calibration
        orientation = calibration.load()["beurling_orientation"]
    gp = Grid(2, g.n * pad, g.L * pad)
    vals = np.zeros(gp.shape, dtype=complex)
    off = (gp.n - g.n) // 2
    vals[off:off + g.n, off:off + g.n] = f.values
    xi = _complex_frequency(gp)
    ratio = np.ones_like(xi)
    nz = xi != 0
    ratio[nz] = np.conj(xi[nz]) / xi[nz]
    if orientation == "xi_over_conj":
        ratio = np.conj(ratio)
    elif orientation != "conj_over_xi":
        raise InvalidInput(f"unknown orientation {orientation!r}")
    # the multiplier commutes with periodic shifts, so placement is immaterial
    out = np.fft.ifft2(np.fft.fft2(vals) * ratio ** m)
    return GridFunction(g, out[off:off + g.n, off:off + g.n], f.periodic)


def pin_beurling_orientation(n: int = 128, sigma_cells: float = 10.0) -> str:
    """Pick the multiplier orientation that matches the spatial ``m = 1``
    kernel on a Laplacian-of-Gaussian test function."""
    g = Grid(2, n, 1.0)
    f = laplacian_gaussian(g, sigma_cells * g.h)
    spatial = truncated_apply(beurling_omega(1), f, g.cell_diagonal, g.diameter).values
    errs = {}
    for o in ("conj_over_xi", "xi_over_conj"):
        ref = beurling_multiplier_apply(1, f, o, pad=4).values
        errs[o] = np.linalg.norm(spatial - ref) / np.linalg.norm(ref)
    return min(errs, key=errs.get)


def beurling_truncation_study(m: int, n: int = 256, sigma_cells: float = 20.0,
                              doublings: int = 3, pad: int = 4) -> dict:
    """Relative L2 gap between the truncated spatial ``K_m`` quadrature and
    the ``(conj(xi)/xi)**m`` multiplier on a Laplacian-of-Gaussian.

    The outer radius runs over ``L / 2**doublings, ..., L / 2, L``; the inner
    radius is one cell diagonal.
    """
    g = Grid(2, n, 1.0)
    f = laplacian_gaussian(g, sigma_cells * g.h)
    ref = beurling_multiplier_apply(m, f, pad=pad).values
    kernel = beurling_omega(m)
    deltas = [g.L / 2 ** i for i in range(doublings, -1, -1)]
    errors = []
    for dl in deltas:
        sp = truncated_apply(kernel, f, g.cell_diagonal, dl).values
        errors.append(float(np.linalg.norm(sp - ref) / np.linalg.norm(ref)))
    return {"m": m, "deltas": deltas, "errors": errors,
            "monotone": all(b < a for a, b in zip(errors, errors[1:]))}


def laplacian_gaussian(grid: Grid, sigma: float, center=None) -> GridFunction:
    """Band-limited, mean-zero test function ``-Laplace exp(-|x-c|^2/(2 sigma^2))``."""
    c = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    mesh = grid.mesh()
    r2 = sum((x - ci) ** 2 for x, ci in zip(mesh, c))
    s2 = sigma * sigma
    vals = (grid.d / s2 - r2 / (s2 * s2)) * np.exp(-r2 / (2 * s2))
    return GridFunction(grid, vals)


# ---------------------------------------------------------------------------
# property checks


def _default_eps(grid: Grid) -> float:
    return grid.cell_diagonal


def continuity_lemma_check(kernel: SmoothCZ, f: GridFunction, eps: float, delta: float,
                           pairs: Sequence[tuple], radii: RadiiSet | None = None) -> float:
    """Worst ``|T f(x) - T f(x')| / ((C_K + Dini) M^c_{eps,2 delta} f(x))``.

    ``pairs`` holds flat index pairs ``(i, i')`` of midpoints with
    ``|x - x'| < eps / 2``.
    """
    g = f.grid
    pts = g.points()
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if pairs.size == 0:
        return 0.0
    sep = np.sqrt(((pts[pairs[:, 0]] - pts[pairs[:, 1]]) ** 2).sum(axis=1))
    if np.any(sep >= eps / 2):
        raise InvalidInput("pairs must satisfy |x - x'| < eps/2")
    t = truncated_apply(kernel, f, eps, delta).values.ravel()
    if radii is None:
        radii = RadiiSet.ladder(g.h, 2 * g.diameter)
    mc = truncated_centered_maximal(f, eps, 2 * delta, radii.as_array()).values.ravel()
    num = np.abs(t[pairs[:, 0]] - t[pairs[:, 1]])
    den = kernel.cz_constant * mc[pairs[:, 0]]
    ratio = np.where(num == 0, 0.0, num / np.where(den > 0, den, np.inf))
    if np.any((num > 0) & (den == 0)):
        return math.inf
    return float(ratio.max())


def weak_type_ratio(values: np.ndarray, l1: float, cell_volume: float) -> float:
    """``sup_lambda lambda |{|g| > lambda}| / l1`` computed exactly from
    the sorted samples."""
    if l1 == 0:
        return 0.0
    a = np.sort(np.abs(values).ravel())[::-1]
    k = np.arange(1, a.size + 1)
    return float(np.max(a * k) * cell_volume / l1)


def weak11_ratio(kernel, fs: Sequence[GridFunction], eps: float | None = None) -> dict:
    """Weak (1,1) ratio of ``T_{eps, R}`` over a test set.

    Returns the ratio and the reference ``||T||_{L2} + ||omega||_Dini``.
    """
    best = 0.0
    for f in fs:
        g = f.grid
        e = _default_eps(g) if eps is None else eps
        tf = truncated_apply(kernel, f, e, g.diameter).values
        best = max(best, weak_type_ratio(tf, f.l1_norm(), g.cell_volume))
    ref = (kernel.l2_norm or 0.0) + (kernel.dini if isinstance(kernel, SmoothCZ) else 0.0)
    return {"ratio": best, "reference": ref}


def cotlar_check(kernel: SmoothCZ, f: GridFunction, delta_exp: float,
                 radii: RadiiSet | None = None, l2_norm: float | None = None) -> float:
    """Smallest ``c`` with ``T_sharp f <= c ((||T|| + Dini) M f + M_delta(T f))``
    on the grid."""
    if not 0 < delta_exp < 1:
        raise InvalidInput("delta_exp must lie in (0, 1)")
    g = f.grid
    lad = TruncationLadder(kernel, f, radii)
    sharp = lad.sharp()
    tf = GridFunction(g, lad.C[-1])
    norm = kernel.l2_norm if l2_norm is None else l2_norm
    if norm is None:
        raise InvalidInput("kernel L2 norm unknown; pass l2_norm")
    mf = hl_maximal(f).values
    md = m_delta(tf, delta_exp).values
    den = (norm + kernel.dini) * mf + md
    if np.any((sharp > 0) & (den == 0)):
        return math.inf
    return float(np.max(np.where(sharp > 0, sharp / np.where(den > 0, den, 1.0), 0.0)))


def standard_test_set(grid: Grid, seed: int = 0) -> list[GridFunction]:
    """Continuum-defined inputs sampled on the grid, so that refinement
    samples the same functions: an off-centre indicator, a Gaussian, a
    signed sum of three bumps and a random piecewise constant."""
    rng = np.random.default_rng(seed)
    mesh = grid.mesh()
    L = grid.L
    out = []
    box = np.ones(grid.shape)
    for x in mesh:
        box = box * ((x >= -0.1 * L) & (x < 0.2 * L))
    out.append(GridFunction(grid, box))
    r2 = sum(x * x for x in mesh)
    out.append(GridFunction(grid, np.exp(-r2 / (2 * (0.05 * L) ** 2))))
    acc = np.zeros(grid.shape)
    for sign in (1.0, -1.0, 1.0):
        c = rng.uniform(-0.3, 0.3, grid.d) * L
        s = rng.uniform(0.02, 0.08) * L
        acc += sign * np.exp(-sum((x - ci) ** 2 for x, ci in zip(mesh, c)) / (2 * s * s))
    out.append(GridFunction(grid, acc))
    m = 8
    coarse = rng.random((m,) * grid.d)
    idx = tuple(np.clip(((x / L + 0.5) * m).astype(int), 0, m - 1) for x in mesh)
    out.append(GridFunction(grid, coarse[idx] * (np.sqrt(r2) < 0.3 * L)))
    return out
