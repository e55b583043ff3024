"""Muckenhoupt characteristics, reverse Hölder checks and power weights.

Every supremum over cubes is taken over a :class:`CubeFamily`: by default
all cubes of all ``3**d`` adjacent dyadic systems that fit inside the grid
domain and contain at least one cell.  Cube averages are midpoint
quadrature over the cells whose midpoints fall in the cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import roots_legendre

from .dyadic import DyadicCube, all_shifts
from .errors import InvalidInput, ResolutionError
from .grid import Grid, GridFunction, cube_cell_slices
from .maximal import local_maximal_batch

__all__ = [
    "CubeFamily",
    "ExplicitFamily",
    "Weight",
    "WeightCharacteristics",
    "ap_constant",
    "ainf_fujii_wilson",
    "characteristics",
    "power_weight",
    "reverse_holder_check",
    "rhi_to_ainf_bound",
    "bump_corollaries_check",
    "largest_rhi_constant",
    "brute_force_ap_1d",
    "dual_exponent",
]


def dual_exponent(p: float) -> float:
    if not p > 1:
        raise InvalidInput("exponent must exceed 1")
    return p / (p - 1)


# ---------------------------------------------------------------------------
# cube families


@dataclass(frozen=True)
class _Group:
    alpha: tuple
    level: int
    starts: tuple  # per-axis start cell indices, each an int array
    stops: tuple

    @property
    def counts(self) -> np.ndarray:
        lens = [b - a for a, b in zip(self.starts, self.stops)]
        out = lens[0].astype(float)
        for ln in lens[1:]:
            out = np.multiply.outer(out, ln.astype(float))
        return out


def _axis_cubes(grid: Grid, alpha: int, level: int):
    side = 2.0 ** (-level)
    s = 1 if level % 2 == 0 else -1
    off = s * alpha / 3.0
    half = grid.L / 2
    # exact integer bounds on the index m so the cube sits inside [-L/2, L/2)
    fside = Fraction(2) ** (-level)
    foff = Fraction(s * alpha, 3)
    flo, fhi = Fraction(-half), Fraction(half)
    mlo = math.ceil(flo / fside - foff)
    mhi = math.floor(fhi / fside - foff) - 1
    if mhi < mlo:
        return None
    m = np.arange(mlo, mhi + 1)
    lo = side * (m + off)
    hi = lo + side
    starts = np.ceil((lo + half) / grid.h - 0.5).astype(int)
    stops = np.ceil((hi + half) / grid.h - 0.5).astype(int)
    starts = np.clip(starts, 0, grid.n)
    stops = np.clip(stops, 0, grid.n)
    return starts, stops


@dataclass(frozen=True)
class CubeFamily:
    """All cubes of the listed shifts between two side lengths.

    ``min_cells`` is the least number of cells per side; ``max_side`` caps
    the side length (defaults to the domain side).
    """

    shifts: tuple | None = None
    min_cells: int = 1
    max_side: float | None = None

    def key(self) -> tuple:
        return ("family", self.shifts, self.min_cells, self.max_side)

    def levels(self, grid: Grid) -> range:
        top = grid.L if self.max_side is None else min(self.max_side, grid.L)
        kmin = math.ceil(-math.log2(top) - 1e-12)
        kmax = math.floor(-math.log2(self.min_cells * grid.h) + 1e-12)
        if kmax < kmin:
            raise ResolutionError("no cube of the family fits the grid")
        return range(kmin, kmax + 1)

    def groups(self, grid: Grid) -> Iterable[_Group]:
        shifts = self.shifts if self.shifts is not None else all_shifts(grid.d)
        for k in self.levels(grid):
            for alpha in shifts:
                axes = [_axis_cubes(grid, a, k) for a in alpha]
                if any(ax is None for ax in axes):
                    continue
                starts = tuple(ax[0] for ax in axes)
                stops = tuple(ax[1] for ax in axes)
                if any(np.any(b - a < 1) for a, b in zip(starts, stops)):
                    continue
                yield _Group(tuple(alpha), k, starts, stops)

    def cubes(self, grid: Grid) -> list[DyadicCube]:
        """Explicit enumeration (small grids only)."""
        out = []
        for g in self.groups(grid):
            per_axis = []
            for a in g.alpha:
                side = Fraction(2) ** (-g.level)
                s = 1 if g.level % 2 == 0 else -1
                foff = Fraction(s * a, 3)
                half = Fraction(grid.L / 2)
                mlo = math.ceil(-half / side - foff)
                mhi = math.floor(half / side - foff) - 1
                per_axis.append(range(mlo, mhi + 1))
            from itertools import product
            out += [DyadicCube(g.alpha, g.level, idx) for idx in product(*per_axis)]
        return out


@dataclass(frozen=True)
class ExplicitFamily:
    """A finite list of cubes; each is treated as a one-cube group."""

    cubes: tuple

    def key(self) -> tuple:
        return ("explicit", self.cubes)

    def groups(self, grid: Grid) -> Iterable[_Group]:
        for q in self.cubes:
            sl = cube_cell_slices(grid, q)
            yield _Group(q.alpha, q.level,
                         tuple(np.array([s.start]) for s in sl),
                         tuple(np.array([s.stop]) for s in sl))


def _as_family(family) -> CubeFamily | ExplicitFamily:
    if family is None:
        return CubeFamily()
    if isinstance(family, (CubeFamily, ExplicitFamily)):
        return family
    cubes = tuple(family)
    if not cubes:
        raise InvalidInput("cube family is empty")
    return ExplicitFamily(cubes)


def _prefix(arr: np.ndarray) -> np.ndarray:
    p = np.pad(arr.astype(float), [(1, 0)] * arr.ndim)
    for ax in range(arr.ndim):
        p = np.cumsum(p, axis=ax)
    return p


def _block_sums(prefix: np.ndarray, g: _Group) -> np.ndarray:
    d = len(g.starts)
    if d == 1:
        return prefix[g.stops[0]] - prefix[g.starts[0]]
    if d == 2:
        a1, b1 = g.starts[0][:, None], g.stops[0][:, None]
        a2, b2 = g.starts[1][None, :], g.stops[1][None, :]
        return prefix[b1, b2] - prefix[a1, b2] - prefix[b1, a2] + prefix[a1, a2]
    raise InvalidInput("cube averages implemented for d = 1, 2")


def _gather_blocks(arr: np.ndarray, g: _Group) -> np.ndarray:
    """Zero-padded batch ``(nb_1, ..., nb_d, m_1, ..., m_d)`` of cube blocks."""
    idx, valid = [], []
    for a, b in zip(g.starts, g.stops):
        m = int(np.max(b - a))
        ii = a[:, None] + np.arange(m)[None, :]
        valid.append(ii < b[:, None])
        idx.append(np.minimum(ii, arr.shape[0] - 1))
    d = len(idx)
    if d == 1:
        return np.where(valid[0], arr[idx[0]], 0.0), valid[0]
    i1 = idx[0][:, None, :, None]
    i2 = idx[1][None, :, None, :]
    v = valid[0][:, None, :, None] & valid[1][None, :, None, :]
    return np.where(v, arr[i1, i2], 0.0), v


# ---------------------------------------------------------------------------
# weights


@dataclass
class Weight:
    """A strictly positive grid function with a write-once characteristic cache."""

    values: GridFunction
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        v = self.values.values
        if np.iscomplexobj(v) or not np.all(np.isfinite(v)) or not np.all(v > 0):
            raise InvalidInput("weight samples must be finite and strictly positive")

    @property
    def grid(self) -> Grid:
        return self.values.grid

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    def power(self, t: float) -> "Weight":
        return Weight(GridFunction(self.grid, self.array ** t))

    def scaled(self, c: float) -> "Weight":
        return Weight(GridFunction(self.grid, c * self.array))

    def _cached(self, key, compute):
        if key not in self.cache:
            self.cache[key] = compute()
        return self.cache[key]


@dataclass(frozen=True)
class WeightCharacteristics:
    p: float
    ap: float
    ainf: float
    dual_ainf: float
    braces: float
    parens: float

    def as_row(self) -> dict:
        return {"p": self.p, "ap": self.ap, "ainf": self.ainf,
                "dual_ainf": self.dual_ainf, "braces": self.braces,
                "parens": self.parens}


def _ap_from_arrays(w: np.ndarray, sigma: np.ndarray, p: float, grid: Grid,
                    fam) -> float:
    pw, ps = _prefix(w), _prefix(sigma)
    best = -np.inf
    for g in fam.groups(grid):
        cnt = g.counts
        aw = _block_sums(pw, g) / cnt
        asg = _block_sums(ps, g) / cnt
        best = max(best, float(np.max(aw * asg ** (p - 1))))
    return best


def ap_constant(w: Weight, p: float, family=None) -> float:
    """``max_Q <w>_Q <w^{1-p'}>_Q^{p-1}`` over the family."""
    fam = _as_family(family)
    pp = dual_exponent(p)

    return w._cached(("ap", p, fam.key()),
                     lambda: _ap_from_arrays(w.array, w.array ** (1 - pp), p,
                                             w.grid, fam))


def _fujii_wilson(arr: np.ndarray, grid: Grid, fam) -> float:
    best = -np.inf
    d = grid.d
    for g in fam.groups(grid):
        blocks, valid = _gather_blocks(arr, g)
        mx = local_maximal_batch(blocks, d)
        axes = tuple(range(blocks.ndim - d, blocks.ndim))
        num = np.where(valid, mx, 0.0).sum(axis=axes)
        den = blocks.sum(axis=axes)
        best = max(best, float(np.max(num / den)))
    return best


def ainf_fujii_wilson(w: Weight, family=None) -> float:
    """``max_Q w(Q)^{-1} \\int_Q M(1_Q w)`` with the lattice-ball maximal operator."""
    fam = _as_family(family)
    return w._cached(("ainf", fam.key()),
                     lambda: _fujii_wilson(w.array, w.grid, fam))


def characteristics(w: Weight, p: float, family=None) -> WeightCharacteristics:
    """All five characteristics of ``w`` at exponent ``p``."""
    fam = _as_family(family)
    pp = dual_exponent(p)
    ap = ap_constant(w, p, fam)
    ainf = ainf_fujii_wilson(w, fam)
    sigma = w.power(1 - pp)
    dual = ainf_fujii_wilson(sigma, fam)
    braces = ap ** (1 / p) * max(ainf ** (1 / pp), dual ** (1 / p))
    parens = max(ainf, dual)
    return WeightCharacteristics(p, ap, ainf, dual, braces, parens)


# ---------------------------------------------------------------------------
# power weights

_GL64 = roots_legendre(64)


def _corner_box_average(a: float, delta: float, d: int) -> float:
    """Average of ``|x|**delta`` over ``[0, a]**d``."""
    if d == 1:
        return a ** delta / (1 + delta)
    if d == 2:
        # polar split about the corner: 2/(delta+2) a^delta int_0^{pi/4} sec^{delta+2}
        x, wts = _GL64
        th = (x + 1) * (math.pi / 8)
        integral = float(np.sum(wts * np.cos(th) ** (-(delta + 2)))) * (math.pi / 8)
        return 2 * a ** delta / (delta + 2) * integral
    raise InvalidInput("power weights implemented for d = 1, 2")


def power_weight(delta: float, grid: Grid) -> Weight:
    """``|x|**delta`` at cell midpoints; cells touching the origin get the
    exact cell average."""
    d = grid.d
    if not abs(delta) < d:
        raise InvalidInput("power weight needs |delta| < d")
    if delta == 0:
        return Weight(GridFunction(grid, np.ones(grid.shape)))
    r = grid.radius()
    vals = r ** delta
    ax = grid.axis()
    near = np.abs(ax) <= grid.h / 2 + 1e-15 * grid.L
    if grid.n % 2 == 0:
        # origin is a cell corner; every adjacent cell is a corner box of side h
        avg = _corner_box_average(grid.h, delta, d)
    else:
        # origin is a cell centre: union of 2^d corner boxes of side h/2
        avg = _corner_box_average(grid.h / 2, delta, d)
    idx = np.nonzero(near)[0]
    for pos in np.ndindex(*([len(idx)] * d)):
        vals[tuple(idx[i] for i in pos)] = avg
    return Weight(GridFunction(grid, vals))


# ---------------------------------------------------------------------------
# reverse Hölder and bumps


def reverse_holder_check(w: Weight, delta: float, family=None) -> dict:
    """Worst ``<w^{1+delta}>_Q / <w>_Q^{1+delta}``; holds iff ``<= 2``."""
    if not delta > 0:
        raise InvalidInput("delta must be positive")
    fam = _as_family(family)
    grid = w.grid
    p1, p2 = _prefix(w.array), _prefix(w.array ** (1 + delta))
    worst = -np.inf
    for g in fam.groups(grid):
        cnt = g.counts
        a1 = _block_sums(p1, g) / cnt
        a2 = _block_sums(p2, g) / cnt
        worst = max(worst, float(np.max(a2 / a1 ** (1 + delta))))
    return {"holds": worst <= 2.0, "worst_ratio": worst}


def largest_rhi_constant(w: Weight, scale: float, family=None, c_hi: float = 64.0,
                         iters: int = 40) -> float:
    """Bisection for the largest ``c`` with the factor-2 reverse Hölder
    inequality at ``delta = c / scale``."""
    lo, hi = 0.0, c_hi
    if reverse_holder_check(w, hi / scale, family)["holds"]:
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if reverse_holder_check(w, mid / scale, family)["holds"]:
            lo = mid
        else:
            hi = mid
    return lo


def rhi_to_ainf_bound(K: float, r: float) -> float:
    """``K * r'``: the reverse-Hölder-to-A_infinity bound without its
    dimensional factor."""
    if K < 1 or not r > 1:
        raise InvalidInput("need K >= 1 and r > 1")
    return K * r / (r - 1)


def bump_corollaries_check(w: Weight, p: float, delta: float, family=None,
                           c_cap: float | None = None) -> dict:
    """Evaluate the three power-bump inequalities at ``delta``.

    ``c_cap`` is the admissibility constant: ``delta <= c_cap / (w)_{A_p}``
    is required.  The ``A_p`` bump (factor 4) is checked verbatim; the
    ``A_infinity`` and mixed-characteristic bumps are reported as ratios.
    """
    from . import calibration

    fam = _as_family(family)
    if c_cap is None:
        c_cap = calibration.load()["bump_c"]
    ch = characteristics(w, p, fam)
    if not 0 < delta <= c_cap / ch.parens * (1 + 1e-12):
        raise InvalidInput(
            f"delta={delta} outside admissible range (0, {c_cap / ch.parens}]")
    wb = w.power(1 + delta)
    ap_b = ap_constant(wb, p, fam)
    ap_ratio = ap_b / ch.ap ** (1 + delta)
    wh = w.power(1 + delta / 2)
    ch_h = characteristics(wh, p, fam)
    ainf_ratio = ch_h.ainf / ch.ainf ** (1 + delta / 2)
    mixed_ratio = ch_h.braces / ch.braces ** (1 + delta / 2)
    return {
        "delta": delta,
        "ap_bumped": ap_b,
        "ap_bump_ratio": ap_ratio,
        "ap_bump_holds": ap_ratio <= 4.0,
        "ainf_bump_ratio": ainf_ratio,
        "mixed_bump_ratio": mixed_ratio,
        "parens_ratio": ch_h.parens / ch.parens ** (1 + delta / 2),
    }


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_ap_1d(w: Weight, p: float, min_cells: int = 1,
                      chunk: int = 512) -> float:
    """Supremum of the ``A_p`` product over every interval of whole cells."""
    if w.grid.d != 1:
        raise InvalidInput("1D oracle")
    pp = dual_exponent(p)
    a = w.array.astype(float)
    s1 = np.concatenate([[0.0], np.cumsum(a)])
    s2 = np.concatenate([[0.0], np.cumsum(a ** (1 - pp))])
    n = a.size
    best = -np.inf
    ends = np.arange(n + 1)
    for i0 in range(0, n, chunk):
        starts = np.arange(i0, min(i0 + chunk, n))
        length = ends[None, :] - starts[:, None]
        ok = length >= min_cells
        L = np.where(ok, length, 1)
        m1 = (s1[None, :] - s1[starts][:, None]) / L
        m2 = (s2[None, :] - s2[starts][:, None]) / L
        val = np.where(ok, m1 * np.abs(m2) ** (p - 1), -np.inf)
        best = max(best, float(val.max()))
    return best


# ---------------------------------------------------------------------------
# calibration of the dimensional constants


def calibrate_power_family(d: int, n: int, deltas, L: float = 1.0, p: float = 2.0,
                           family=None) -> dict:
    """Measure the dimensional constants on ``|x|^delta`` weights.

    ``bump_c`` is the smallest (over the family) largest ``c`` for which the
    factor-2 reverse Hölder inequality holds at ``c / (w)_{A_p}``;
    ``ainf_over_ap`` is the largest ``[w]_{A_inf} / [w]_{A_p}``; ``rhi_C``
    is the largest ``[w]_{A_inf} / (K r')`` with ``K = 2`` and ``r = 1 + c/[w]_{A_inf}``
    at the bisected ``c``.
    """
    grid = Grid(d, n, L)
    rows = []
    for delta in deltas:
        w = power_weight(delta, grid)
        ch = characteristics(w, p, family)
        c_bump = largest_rhi_constant(w, ch.parens, family)
        c_ainf = largest_rhi_constant(w, ch.ainf, family)
        r = 1 + c_ainf / ch.ainf
        rows.append({"delta": delta, "ap": ch.ap, "ainf": ch.ainf, "parens": ch.parens,
                     "c_bump": c_bump, "c_ainf": c_ainf,
                     "rhi_C": ch.ainf / rhi_to_ainf_bound(2.0, r)})
    return {"rows": rows,
            "bump_c": min(r["c_bump"] for r in rows),
            "ainf_over_ap": max(r["ainf"] / r["ap"] for r in rows),
            "rhi_C": max(r["rhi_C"] for r in rows)}
