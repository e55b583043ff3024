"""Discrete Hardy-Littlewood maximal operators over ladders of balls.

A ball of radius ``r`` centred at a lattice point ``c`` is the set of cells
whose midpoints lie at distance ``< r`` from ``c``; its average divides by
the number of such cells.  Centres range over the cell lattice (extended
by zeros outside the sampled region), radii over a geometric ladder.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.signal import fftconvolve

from .errors import InvalidInput
from .grid import GridFunction

__all__ = [
    "radius_ladder",
    "hl_maximal",
    "truncated_centered_maximal",
    "m_delta",
    "local_maximal_batch",
    "centered_ball_averages",
]

DEFAULT_RHO = 2.0 ** 0.25


def radius_ladder(rmin: float, rmax: float, rho: float = DEFAULT_RHO) -> np.ndarray:
    """Geometric radii ``rmin * rho**j`` up to the first value ``>= rmax``."""
    if not (rmin > 0 and rmax >= rmin and 1 < rho <= 2):
        raise InvalidInput("need 0 < rmin <= rmax and 1 < rho <= 2")
    nsteps = int(np.ceil(np.log(rmax / rmin) / np.log(rho) - 1e-12))
    return rmin * rho ** np.arange(nsteps + 1)


def _disk(r_cells: float, d: int) -> np.ndarray:
    q = int(np.ceil(r_cells)) - 1 if r_cells > 0 else 0
    q = max(q, 0)
    ax = np.arange(-q, q + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    dist2 = sum(g * g for g in grids)
    return (dist2 < r_cells * r_cells).astype(float)


def _distinct_disks(radii_cells, d):
    """Drop ladder radii that select the same lattice ball as a smaller one."""
    seen, out = set(), []
    for r in radii_cells:
        disk = _disk(r, d)
        key = (disk.shape, int(disk.sum()))
        if key not in seen:
            seen.add(key)
            out.append((r, disk))
    return out


def _ball_sum(arr: np.ndarray, disk: np.ndarray, d: int) -> np.ndarray:
    """Sum of ``arr`` over the ball around every site (last ``d`` axes)."""
    if disk.size == 1:
        return arr.copy()
    if d == 1:
        q = disk.shape[0] // 2
        pad = [(0, 0)] * (arr.ndim - 1) + [(q + 1, q)]
        c = np.cumsum(np.pad(arr, pad), axis=-1)
        return c[..., 2 * q + 1:] - c[..., :-2 * q - 1]
    axes = tuple(range(arr.ndim - d, arr.ndim))
    kern = disk.reshape((1,) * (arr.ndim - d) + disk.shape)
    out = fftconvolve(arr, kern, mode="same", axes=axes)
    return np.real(out)


def _disk_max(arr: np.ndarray, disk: np.ndarray, d: int) -> np.ndarray:
    """Max of ``arr`` over the (symmetric) ball footprint around each site."""
    if disk.size == 1:
        return arr.copy()
    q = disk.shape[0] // 2
    if d == 1:
        return maximum_filter1d(arr, size=2 * q + 1, axis=-1, mode="constant",
                                cval=-np.inf)
    if d != 2:
        raise InvalidInput("maximal functions implemented for d = 1, 2")
    out = np.full_like(arr, -np.inf)
    n0 = arr.shape[-2]
    cache = {}
    for dy in range(-q, q + 1):
        row = disk[dy + q]
        if row.sum() == 0:
            continue
        w = int(row.sum()) // 2
        if w not in cache:
            cache[w] = maximum_filter1d(arr, size=2 * w + 1, axis=-1,
                                        mode="constant", cval=-np.inf)
        m = cache[w]
        # out[..., i, :] = max(out, m[..., i + dy, :])
        if dy >= 0:
            out[..., : n0 - dy, :] = np.maximum(out[..., : n0 - dy, :], m[..., dy:, :])
        else:
            out[..., -dy:, :] = np.maximum(out[..., -dy:, :], m[..., : n0 + dy, :])
    return out


def local_maximal_batch(blocks: np.ndarray, d: int, rho: float = DEFAULT_RHO,
                        rmax_cells: float | None = None) -> np.ndarray:
    """Uncentered maximal function of each zero-extended block.

    ``blocks`` has shape ``(..., m_1, ..., m_d)`` holding nonnegative values;
    the result has the same shape and is the supremum, over lattice balls
    containing the site with radius on the ladder, of the ball average.
    """
    shape = blocks.shape[-d:]
    if rmax_cells is None:
        rmax_cells = float(np.sqrt(sum(s * s for s in shape))) + 1.0
    radii = radius_ladder(1.0, rmax_cells, rho)
    pad_w = int(np.ceil(rmax_cells))
    pad = [(0, 0)] * (blocks.ndim - d) + [(pad_w, pad_w)] * d
    big = np.pad(np.abs(blocks).astype(float), pad)
    best = np.abs(blocks).astype(float).copy()
    core = (Ellipsis,) + tuple(slice(pad_w, pad_w + s) for s in shape)
    for r, disk in _distinct_disks(radii, d):
        avg = _ball_sum(big, disk, d) / disk.sum()
        mx = _disk_max(avg, disk, d)
        np.maximum(best, mx[core], out=best)
    return best


def hl_maximal(f: GridFunction, radii=None, rho: float = DEFAULT_RHO) -> GridFunction:
    """Uncentered Hardy-Littlewood maximal function ``M|f|``."""
    g = f.grid
    if radii is None:
        rmax_cells = g.n * np.sqrt(g.d)
    else:
        rmax_cells = float(np.max(radii)) / g.h
    vals = local_maximal_batch(np.abs(f.values), g.d, rho, rmax_cells)
    return GridFunction(g, vals)


def centered_ball_averages(f: GridFunction, radii) -> tuple[np.ndarray, np.ndarray]:
    """Centred averages of ``|f|`` for each radius: shape ``(len(radii),) + grid``."""
    g = f.grid
    radii = np.asarray(radii, dtype=float)
    out = np.empty((len(radii),) + g.shape)
    a = np.abs(f.values).astype(float)
    for i, r in enumerate(radii):
        disk = _disk(r / g.h, g.d)
        q = disk.shape[0] // 2
        big = np.pad(a, [(q, q)] * g.d)
        s = _ball_sum(big, disk, g.d)
        core = tuple(slice(q, q + g.n) for _ in range(g.d))
        out[i] = s[core] / disk.sum()
    return radii, out


def truncated_centered_maximal(f: GridFunction, eps: float, delta: float,
                               radii=None, rho: float = DEFAULT_RHO) -> GridFunction:
    """``sup`` of centred ball averages of ``|f|`` over ladder radii in ``(eps, delta)``."""
    if not eps < delta:
        raise InvalidInput("need eps < delta")
    g = f.grid
    if radii is None:
        radii = radius_ladder(g.h, g.diameter, rho)
    radii = np.asarray(radii, dtype=float)
    sel = radii[(radii > eps) & (radii < delta)]
    if sel.size == 0:
        return GridFunction.zeros(g)
    _, avgs = centered_ball_averages(f, sel)
    return GridFunction(g, avgs.max(axis=0))


def m_delta(f: GridFunction, delta_exp: float, rho: float = DEFAULT_RHO) -> GridFunction:
    """``(M |f|**delta)**(1/delta)`` for ``0 < delta <= 1``."""
    if not 0 < delta_exp <= 1:
        raise InvalidInput("delta_exp must lie in (0, 1]")
    p = GridFunction(f.grid, np.abs(f.values) ** delta_exp)
    return GridFunction(f.grid, hl_maximal(p, rho=rho).values ** (1.0 / delta_exp))
