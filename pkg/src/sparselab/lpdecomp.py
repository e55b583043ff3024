"""Smooth Littlewood-Paley splitting of rough homogeneous kernels.

The kernel ``Omega(x')/|x|^d`` is cut into dyadic annuli ``K_k`` (radii
``2^k < |x| <= 2^(k+1)``) and each annulus is paired with differences of a
compactly supported mollifier at a scale shifted by a schedule ``N(j)``.

Fourier transforms are continuum quantities evaluated at the grid's
frequencies.  Annulus transforms use the angular Fourier modes of
``Omega`` and closed forms for ``int_0^x J_nu(t) dt / t``; mollifier
transforms use radial Gauss-Legendre quadrature.  Spatial estimates of the
piece kernels are evaluated pointwise in the continuum, using the exact
dilation structure ``K_k * phi_(k-N) (x) = 2^(-kd) (K_0 * phi_(-N))(2^-k x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import InvalidInput, ResolutionError
from .grid import Grid, GridFunction
from .operators import RoughHomogeneous

__all__ = [
    "Mollifier",
    "Schedule",
    "PieceEstimates",
    "get_schedule",
    "build_mollifier",
    "resolvable_levels",
    "annular_kernel",
    "annulus_dft",
    "multiplier_of_annulus",
    "envelope_fit",
    "partial_sum",
    "piece_multiplier",
    "piece_apply",
    "piece_l2_norm",
    "truncated_multiplier",
    "telescoping_residuals",
    "piece_kernel",
    "piece_kernel_estimates",
    "rough_odd_1d",
    "scale_invariance_error",
    "multiplier_envelope",
    "piece_decay_fit",
    "kernel_estimate_fit",
]

MOLLIFIER_RADIUS = 0.01


# ---------------------------------------------------------------------------
# mollifier


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_mass(d: int) -> float:
    if d == 1:
        return 2 * integrate.quad(lambda s: math.exp(-1 / (1 - s * s)), 0, 1, epsabs=0, epsrel=1e-13)[0]
    if d == 2:
        return 2 * math.pi * integrate.quad(lambda s: s * math.exp(-1 / (1 - s * s)), 0, 1,
                                            epsabs=0, epsrel=1e-13)[0]
    raise InvalidInput("mollifier implemented for d = 1, 2")


def _one_minus_j0(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    out = 1.0 - special.j0(x)
    xs = x[small]
    q = xs * xs / 4
    term = q.copy()
    acc = term.copy()
    for k in range(2, 12):
        term = -term * q / (k * k)
        acc += term
    out[small] = acc
    return out


class Mollifier:
    """``phi(x) = c exp(-1/(1 - |x/r|^2))`` on ``|x| < r = 1/100``, unit mass.

    ``hat`` and ``one_minus_hat`` take ``|xi|`` (radial functions).  The
    second form avoids cancellation at small frequencies.
    """

    def __init__(self, d: int, radius: float = MOLLIFIER_RADIUS, nodes: int = 256):
        if d not in (1, 2):
            raise InvalidInput("mollifier implemented for d = 1, 2")
        self.d = d
        self.radius = radius
        self.mass = _bump_mass(d)
        x, w = leggauss(nodes)
        self._s = 0.5 * (x + 1)
        self._w = 0.5 * w * _bump(self._s) / self.mass
        if d == 1:
            self._w = 2 * self._w
        else:
            self._w = 2 * math.pi * self._w * self._s
        # even moments for the small-argument power series of 1 - phi_hat
        k = np.arange(1, 21)
        self._moments = (self._s[None, :] ** (2 * k[:, None])) @ self._w
        if d == 1:
            self._series = (-1.0) ** (k + 1) * (2 * np.pi) ** (2 * k) / special.factorial(2 * k) * self._moments
        else:
            self._series = (-1.0) ** (k + 1) * np.pi ** (2 * k) / special.factorial(k) ** 2 * self._moments

    def phi(self, x) -> np.ndarray:
        """Samples at points ``x`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        r = np.sqrt((x * x).sum(axis=-1)) / self.radius
        return _bump(r) / (self.mass * self.radius ** self.d)

    def _radial(self, rho, kernel_fn, series: bool):
        rho = np.asarray(rho, dtype=float)
        flat = np.abs(rho.ravel()) * self.radius
        uniq, inv = np.unique(flat, return_inverse=True)
        out = np.empty(uniq.size)
        small = 2 * np.pi * uniq < 1.0
        if series and small.any():
            e2 = uniq[small] ** 2
            acc = np.zeros_like(e2)
            for c in self._series[::-1]:
                acc = (acc + c) * e2
            out[small] = acc
        else:
            small[:] = False
        rest = np.nonzero(~small)[0]
        step = max(1, 4_000_000 // self._s.size)
        for a in range(0, rest.size, step):
            idx = rest[a:a + step]
            arg = 2 * np.pi * np.outer(uniq[idx], self._s)
            out[idx] = kernel_fn(arg) @ self._w
        return out[inv].reshape(rho.shape)

    def hat(self, rho) -> np.ndarray:
        return 1.0 - self.one_minus_hat(rho)

    def one_minus_hat(self, rho) -> np.ndarray:
        if self.d == 1:
            return self._radial(rho, lambda a: 2 * np.sin(a / 2) ** 2, True)
        return self._radial(rho, _one_minus_j0, True)

    def psi_hat(self, rho) -> np.ndarray:
        """``phi_hat(xi) - phi_hat(2 xi)``."""
        rho = np.asarray(rho, dtype=float)
        return self.one_minus_hat(2 * rho) - self.one_minus_hat(rho)

    def psi(self, x) -> np.ndarray:
        """``phi(x) - 2^d phi(2x)``."""
        x = np.asarray(x, dtype=float)
        return self.phi(x) - 2 ** self.d * self.phi(2 * x)


@lru_cache(maxsize=4)
def build_mollifier(d: int) -> Mollifier:
    return Mollifier(d)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedule:
    """Increasing integer map ``N`` with ``N(0) = 0``."""

    name: str

    def __call__(self, j: int) -> int:
        if j < 0:
            raise InvalidInput("schedule index must be nonnegative")
        if self.name == "dyadic":
            return 0 if j == 0 else 2 ** j
        if self.name == "identity":
            return j
        raise InvalidInput(f"unknown schedule {self.name!r}")

    def values(self, upto: int) -> list[int]:
        return [self(j) for j in range(upto + 1)]


def get_schedule(name: str) -> Schedule:
    s = Schedule(name)
    s(1)
    return s


# ---------------------------------------------------------------------------
# annuli


def rough_odd_1d(c: float = 1.0) -> RoughHomogeneous:
    """``c sign(x) / |x|`` as a rough homogeneous kernel on the line."""
    return RoughHomogeneous(1, lambda u: c * np.sign(u[..., 0]), abs(c), "rough-odd1d")


def resolvable_levels(grid: Grid) -> list[int]:
    """Levels ``k`` with ``2^k >= 4h`` and ``2^(k+1) <= L/8``."""
    lo = math.ceil(math.log2(4 * grid.h) - 1e-12)
    hi = math.floor(math.log2(grid.L / 8) + 1e-12) - 1
    if hi < lo:
        raise ResolutionError("grid resolves no dyadic annulus")
    return list(range(lo, hi + 1))


def _check_level(grid: Grid, k: int) -> None:
    if k not in resolvable_levels(grid):
        raise ResolutionError(f"annulus level {k} is not resolvable on this grid")


def _centered_offsets(grid: Grid) -> np.ndarray:
    ax = (np.arange(grid.n) - grid.n // 2) * grid.h
    return np.stack(np.meshgrid(*([ax] * grid.d), indexing="ij"), axis=-1)


def annular_kernel(kernel: RoughHomogeneous, k: int, grid: Grid) -> np.ndarray:
    """Samples of ``K_k`` at the offsets ``(i - n/2) h``, annulus ``(2^k, 2^(k+1)]``."""
    _check_level(grid, k)
    z = _centered_offsets(grid)
    r = np.sqrt((z * z).sum(axis=-1))
    inside = (r > 2.0 ** k) & (r <= 2.0 ** (k + 1))
    out = np.zeros(r.shape, dtype=complex)
    out[inside] = kernel.evaluate(z[inside])
    return out


def annulus_dft(kernel: RoughHomogeneous, k: int, grid: Grid) -> np.ndarray:
    """Riemann-sum transform of the sampled annulus, FFT order (cross-check)."""
    samples = annular_kernel(kernel, k, grid)
    shifted = np.fft.ifftshift(samples)
    return np.fft.fftn(shifted) * grid.cell_volume


def _angular_modes(kernel: RoughHomogeneous, m: int = 256, tol: float = 1e-13):
    th = 2 * np.pi * np.arange(m) / m
    u = np.stack([np.cos(th), np.sin(th)], axis=-1)
    coef = np.fft.fft(kernel.omega_fn(u)) / m
    nu = np.fft.fftfreq(m, 1.0 / m).astype(int)
    keep = np.abs(coef) > tol * max(np.abs(coef).max(), 1e-300)
    if keep[nu == 0].any():
        raise InvalidInput("Omega must have zero mean on the circle")
    return [(int(n), complex(c)) for n, c in zip(nu[keep], coef[keep])]


def _int_j0(x):
    # int_0^x J_0 via Struve functions
    return x * special.j0(x) + 0.5 * np.pi * x * (
        special.j1(x) * special.struve(0, x) - special.j0(x) * special.struve(1, x))


def _bessel_over_t(nu: int, x) -> np.ndarray:
    """``int_0^x J_nu(t) dt / t`` for ``nu >= 1`` and ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 2.0
    xs = x[small] / 2
    acc = np.zeros_like(xs)
    for k in range(30):
        acc += ((-1) ** k * xs ** (nu + 2 * k)
                / (math.factorial(k) * math.factorial(nu + k) * (nu + 2 * k)))
    out[small] = acc
    xl = x[~small]
    # G_mu = int_0^x J_mu: G_0 closed form, G_1 = 1 - J_0, G_(mu+1) = G_(mu-1) - 2 J_mu;
    # even nu only needs the odd chain
    G = [_int_j0(xl) if nu % 2 else None, 1.0 - special.j0(xl)]
    for mu in range(1, nu + 1):
        G.append(None if G[mu - 1] is None else G[mu - 1] - 2 * special.jv(mu, xl))
    out[~small] = (G[nu - 1] + G[nu + 1]) / (2 * nu)
    return out


def _annulus_hat(kernel: RoughHomogeneous, scale: float, xi: list) -> np.ndarray:
    """Continuum transform of the annulus ``(scale, 2 scale]`` at frequencies ``xi``."""
    if kernel.d == 1:
        x = xi[0]
        plus = complex(kernel.omega_fn(np.array([[1.0]]))[0])
        minus = complex(kernel.omega_fn(np.array([[-1.0]]))[0])
        if abs(plus + minus) > 1e-12 * max(abs(plus), 1e-300):
            raise InvalidInput("Omega must be odd on the line")
        a = 2 * np.pi * scale * x
        si_hi, _ = special.sici(2 * a)
        si_lo, _ = special.sici(a)
        return -1j * (plus - minus) * (si_hi - si_lo)
    if kernel.d != 2:
        raise InvalidInput("annulus transforms implemented for d = 1, 2")
    rho = np.sqrt(xi[0] ** 2 + xi[1] ** 2)
    phi = np.arctan2(xi[1], xi[0])
    out = np.zeros(rho.shape, dtype=complex)
    # radial factors depend on |xi| only
    uniq, inv = np.unique(rho.ravel(), return_inverse=True)
    a = 2 * np.pi * scale * uniq
    cache = {}
    for nu, c in _angular_modes(kernel):
        m = abs(nu)
        if m not in cache:
            cache[m] = (_bessel_over_t(m, 2 * a) - _bessel_over_t(m, a))[inv].reshape(rho.shape)
        out += c * 2 * np.pi * (-1j) ** m * np.exp(1j * nu * phi) * cache[m]
    return out


def multiplier_of_annulus(kernel: RoughHomogeneous, k: int, xi=None,
                          grid: Grid | None = None) -> np.ndarray:
    """``K_k hat`` at frequencies ``xi`` (list of per-axis arrays).

    With ``grid`` given and ``xi`` omitted, the grid's FFT frequencies are
    used and ``k`` must be resolvable.
    """
    if xi is None:
        if grid is None:
            raise InvalidInput("give frequencies or a grid")
        _check_level(grid, k)
        xi = grid.frequencies()
    return _annulus_hat(kernel, 2.0 ** k, [np.asarray(x, dtype=float) for x in xi])


def envelope_fit(eta, values, bins: int = 60) -> dict:
    """Fit ``|m| <= C min(eta^a, eta^-a)`` on both flanks of ``eta = 1``.

    Per flank, the exponent is the least-squares slope of the log bin
    maxima; ``C`` covers every bin maximum at its bin centre and the
    violation fraction counts raw samples above the resulting envelope.
    """
    eta = np.asarray(eta, dtype=float).ravel()
    v = np.abs(np.asarray(values)).ravel()
    ok = (eta > 0) & (v > 0)
    eta, v = eta[ok], v[ok]
    le = np.log10(eta)
    edges = np.linspace(le.min(), le.max(), bins + 1)
    which = np.clip(np.digitize(le, edges) - 1, 0, bins - 1)
    centers, maxima = [], []
    for b in range(bins):
        sel = which == b
        if sel.any():
            centers.append(0.5 * (edges[b] + edges[b + 1]))
            maxima.append(np.log10(v[sel].max()))
    centers = np.array(centers)
    maxima = np.array(maxima)
    low = centers < 0
    high = centers > 0
    if low.sum() < 3 or high.sum() < 3:
        raise InvalidInput("frequency samples must straddle |eta| = 1 on both sides")
    a_low = float(np.polyfit(centers[low], maxima[low], 1)[0])
    a_high = float(-np.polyfit(centers[high], maxima[high], 1)[0])
    a = min(a_low, a_high)
    env_c = np.minimum(10 ** (a * centers), 10 ** (-a * centers))
    C = float(np.max(10 ** maxima / env_c))
    env = C * np.minimum(eta ** a, eta ** (-a))
    return {"alpha_low": a_low, "alpha_high": a_high, "alpha": a, "C": C,
            "violations": float(np.mean(v > env * (1 + 1e-12))),
            "samples": int(v.size)}


# ---------------------------------------------------------------------------
# partial sums and pieces


def _radius(xi):
    return np.sqrt(sum(x * x for x in xi))


def partial_sum(f: GridFunction, j: int) -> GridFunction:
    """``S_j f = f * phi_j`` with ``phi_j(x) = 2^(-jd) phi(x / 2^j)`` (periodic)."""
    g = f.grid
    mol = build_mollifier(g.d)
    rho = _radius(g.frequencies())
    mult = 1.0 - mol.one_minus_hat(2.0 ** j * rho)
    out = np.fft.ifftn(np.fft.fftn(f.values) * mult)
    if not np.iscomplexobj(f.values):
        out = out.real
    return GridFunction(g, out, True)


def _scale_factor(mol: Mollifier, rho, k: int, j: int, schedule: Schedule):
    if j == 0:
        return 1.0 - mol.one_minus_hat(2.0 ** k * rho)
    a, b = schedule(j), schedule(j - 1)
    # phi_hat(2^(k-a) xi) - phi_hat(2^(k-b) xi), written with 1 - phi_hat
    return mol.one_minus_hat(2.0 ** (k - b) * rho) - mol.one_minus_hat(2.0 ** (k - a) * rho)


def piece_multiplier(kernel: RoughHomogeneous, schedule: Schedule, j: int,
                     grid: Grid, levels=None) -> np.ndarray:
    """``m_j(xi) = sum_k K_k hat(xi) (phi_hat(2^(k-N(j)) xi) - phi_hat(2^(k-N(j-1)) xi))``.

    ``j = 0`` gives ``sum_k K_k hat(xi) phi_hat(2^k xi)``; ``k`` runs over
    the resolvable levels unless ``levels`` is given.
    """
    if j < 0:
        raise InvalidInput("piece index must be nonnegative")
    if kernel.d != grid.d:
        raise InvalidInput("kernel/grid dimension mismatch")
    levels = resolvable_levels(grid) if levels is None else list(levels)
    mol = build_mollifier(grid.d)
    xi = grid.frequencies()
    rho = _radius(xi)
    out = np.zeros(rho.shape, dtype=complex)
    for k in levels:
        out += _annulus_hat(kernel, 2.0 ** k, xi) * _scale_factor(mol, rho, k, j, schedule)
    return out


def truncated_multiplier(kernel: RoughHomogeneous, grid: Grid, levels=None) -> np.ndarray:
    """``sum_k K_k hat`` over the resolvable levels."""
    levels = resolvable_levels(grid) if levels is None else list(levels)
    xi = grid.frequencies()
    return sum(_annulus_hat(kernel, 2.0 ** k, xi) for k in levels)


def piece_apply(kernel: RoughHomogeneous, schedule: Schedule, j: int,
                f: GridFunction, levels=None) -> GridFunction:
    """``T_j^N f`` through its multiplier on the periodic grid."""
    m = piece_multiplier(kernel, schedule, j, f.grid, levels)
    return GridFunction(f.grid, np.fft.ifftn(np.fft.fftn(f.values) * m), True)


def piece_l2_norm(kernel: RoughHomogeneous, schedule: Schedule, j: int,
                  grid: Grid, levels=None) -> float:
    """Operator norm of the discrete multiplier: ``max |m_j|`` over the grid."""
    return float(np.abs(piece_multiplier(kernel, schedule, j, grid, levels)).max())


def telescoping_residuals(kernel: RoughHomogeneous, schedule: Schedule, J: int,
                          f: GridFunction, levels=None) -> list[float]:
    """``||sum_{j<=J'} T_j^N f - T f||_2`` for ``J' = 0..J`` (``T`` truncated)."""
    g = f.grid
    fh = np.fft.fftn(f.values)
    target = truncated_multiplier(kernel, g, levels)
    acc = np.zeros(g.shape, dtype=complex)
    out = []
    for j in range(J + 1):
        acc += piece_multiplier(kernel, schedule, j, g, levels)
        diff = np.fft.ifftn(fh * (acc - target))
        out.append(float(np.sqrt(np.sum(np.abs(diff) ** 2) * g.cell_volume)))
    return out


# ---------------------------------------------------------------------------
# spatial piece kernels (continuum evaluation)


class _MollifiedAnnulus:
    """``G_N(y) = (K_0 * phi_(-N))(y)``, ``phi_(-N)`` of radius ``eps = r 2^-N``."""

    def __init__(self, kernel: RoughHomogeneous, nodes: int = 24):
        self.kernel = kernel
        self.d = kernel.d
        self.mol = build_mollifier(self.d)
        x, w = leggauss(nodes)
        self._x, self._w = x, w
        xs, ws = leggauss(8)
        self._xs, self._ws = xs, ws
        if self.d == 2:
            self.modes = _angular_modes(kernel)
        else:
            self.plus = complex(kernel.omega_fn(np.array([[1.0]]))[0])

    def eps(self, N: int) -> float:
        return self.mol.radius * 2.0 ** (-N)

    # 1D: exact split at the four jump points ---------------------------

    def _eval_1d(self, y, eps):
        y = np.asarray(y, dtype=float)
        jumps = np.stack([(y - s) / eps for s in (-2.0, -1.0, 1.0, 2.0)], axis=-1)
        cuts = np.concatenate([np.full(y.shape + (1,), -1.0), np.clip(jumps, -1, 1),
                               np.full(y.shape + (1,), 1.0)], axis=-1)
        cuts = np.sort(cuts, axis=-1)
        a, b = cuts[..., :-1], cuts[..., 1:]
        u = 0.5 * (b - a)[..., None] * self._x + 0.5 * (a + b)[..., None]
        w = 0.5 * (b - a)[..., None] * self._w
        z = y[..., None, None] - eps * u
        az = np.abs(z)
        inside = (az > 1) & (az <= 2)
        kv = np.where(inside, self.plus * np.sign(z) / np.where(az > 0, az, 1.0), 0.0)
        dens = _bump(np.abs(u)) / self.mol.mass
        return (kv * dens * w).sum(axis=(-1, -2))

    # 2D: mode-wise radial profiles ---------------------------------------

    def _profile(self, nu: int, r, eps):
        """``(e^{i nu theta} chi / |z|^2) * phi_eps`` at ``(r, 0)``."""
        r = np.asarray(r, dtype=float)
        near = (np.abs(r - 1) < 1.01 * eps) | (np.abs(r - 2) < 1.01 * eps)
        out = np.empty(r.shape, dtype=complex)
        if (~near).any():
            out[~near] = self._profile_quad(nu, r[~near], eps, self._xs, self._ws, split=False)
        if near.any():
            out[near] = self._profile_quad(nu, r[near], eps, self._x, self._w, split=True)
        return out

    def _profile_quad(self, nu, r, eps, x, w, split):
        # outer Gauss-Legendre in b (across y), inner in a (along y), split
        # where |y - eps u| crosses the radii 1 and 2
        b = x
        wb = w
        half = np.sqrt(1 - b * b)
        rr = r[:, None]
        if split:
            cuts = [-half[None, :] * np.ones_like(rr), half[None, :] * np.ones_like(rr)]
            for R in (1.0, 2.0):
                disc = np.sqrt(np.maximum(R * R - (eps * b) ** 2, 0))[None, :]
                for sgn in (-1, 1):
                    cuts.append(np.clip((rr + sgn * disc) / eps, -half, half))
            cuts = np.sort(np.stack(cuts, axis=-1), axis=-1)
        else:
            cuts = np.stack([-half[None, :] * np.ones_like(rr),
                             half[None, :] * np.ones_like(rr)], axis=-1)
        lo, hi = cuts[..., :-1], cuts[..., 1:]
        a = 0.5 * (hi - lo)[..., None] * x + 0.5 * (hi + lo)[..., None]
        wa = 0.5 * (hi - lo)[..., None] * w
        bb = b[None, :, None, None]
        z1 = rr[:, :, None, None] - eps * a
        z2 = -eps * bb
        rz2 = z1 * z1 + z2 * z2
        rz = np.sqrt(rz2)
        inside = (rz > 1) & (rz <= 2)
        ang = np.exp(1j * nu * np.arctan2(z2, z1))
        kv = np.where(inside, ang / np.where(rz2 > 0, rz2, 1.0), 0.0)
        dens = _bump(np.sqrt(a * a + bb * bb)) / self.mol.mass
        return (kv * dens * wa * wb[None, :, None, None]).sum(axis=(-1, -2, -3))

    def __call__(self, y, N: int):
        """``G_N`` at points ``y`` of shape ``(..., d)``."""
        y = np.asarray(y, dtype=float)
        eps = self.eps(N)
        if self.d == 1:
            return self._eval_1d(y[..., 0], eps)
        r = np.sqrt((y * y).sum(axis=-1))
        th = np.arctan2(y[..., 1], y[..., 0])
        out = np.zeros(r.shape, dtype=complex)
        # only points within eps of the annulus carry mass
        live = (r > 1 - eps) & (r < 2 + eps)
        for nu, c in self.modes:
            prof = np.zeros(r.shape, dtype=complex)
            if live.any():
                prof[live] = self._profile(nu, r[live], eps)
            out += c * np.exp(1j * nu * th) * prof
        return out


def piece_kernel(kernel: RoughHomogeneous, schedule: Schedule, j: int):
    """Callable ``z -> K_j^N(z)`` summing every dyadic level (continuum)."""
    G = _MollifiedAnnulus(kernel)
    d = kernel.d
    a = schedule(j)
    b = schedule(j - 1) if j >= 1 else None
    reach = 1 + G.eps(0)

    def K(z):
        z = np.asarray(z, dtype=float)
        r = np.sqrt((z * z).sum(axis=-1))
        out = np.zeros(r.shape, dtype=complex)
        kmin = int(np.floor(np.log2(np.min(r[r > 0]) / (2 * reach)))) if np.any(r > 0) else 0
        kmax = int(np.ceil(np.log2(np.max(r) / (1 - G.eps(0))))) if np.any(r > 0) else 0
        for k in range(kmin, kmax + 1):
            y = z * 2.0 ** (-k)
            ry = r * 2.0 ** (-k)
            live = (ry > 1 - G.eps(0)) & (ry < 2 + G.eps(0))
            if not live.any():
                continue
            val = G(y[live], a)
            if b is not None:
                val = val - G(y[live], b)
            out[live] += 2.0 ** (-k * d) * val
        return out

    return K


@dataclass
class PieceEstimates:
    """Measured constants of one piece; ``alpha_fit`` filled by table fits."""

    j: int
    N: int
    l2_norm: float
    size_const: float
    dini: float
    alpha_fit: float = float("nan")
    small_t_slope: float = float("nan")

    def as_row(self) -> dict:
        return {"j": self.j, "N": self.N, "l2_norm": self.l2_norm,
                "size_const": self.size_const, "dini": self.dini,
                "alpha_fit": self.alpha_fit}


def _random_directions(rng, n, d):
    if d == 1:
        return rng.choice([-1.0, 1.0], size=(n, 1))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def piece_kernel_estimates(kernel: RoughHomogeneous, schedule: Schedule, j: int,
                           grid: Grid | None = None, pairs: int = 1000,
                           tmin_extra: int = 12, seed: int = 0) -> PieceEstimates:
    """Size constant and empirical Dini integral of the piece kernel.

    By dilation invariance, ``|z|^d K(z)`` and the smoothness quotient only
    depend on ``z / 2^k``, so samples are drawn with ``|z|`` in ``[1, 2)``,
    half of them concentrated near the annulus edges where the mollified
    jumps live.  For each ``t = 2^-i`` (``i = 1 .. N(j) + tmin_extra``)
    the bucket holds ``pairs`` samples of ``|K(z + h) - K(z)| |z|^d`` with
    ``|h| = t |z|``; the modulus is the running max over ``t`` and its
    Dini integral the dyadic sum ``sum omega(2^-i) ln 2``.
    """
    rng = np.random.default_rng(seed)
    d = kernel.d
    K = piece_kernel(kernel, schedule, j)
    Nj = schedule(j)
    Nprev = schedule(j - 1) if j >= 1 else 0
    eps_fine = MOLLIFIER_RADIUS * 2.0 ** (-Nj)
    eps_coarse = MOLLIFIER_RADIUS * 2.0 ** (-Nprev)

    def sample_radii(n, scale):
        # half near the edges 1 and 2 (log-spread offsets), half uniform
        m = n // 2
        off = np.exp(rng.uniform(np.log(eps_fine * 1e-3), np.log(max(4 * eps_coarse, 4 * scale)), m))
        edge = rng.choice([1.0, 2.0], m)
        sgn = rng.choice([-1.0, 1.0], m)
        near = np.clip(edge + sgn * off, 1.0, 2.0 - 1e-15)
        return np.concatenate([near, rng.uniform(1.0, 2.0, n - m)])

    # size constant
    r = sample_radii(4 * pairs, eps_coarse)
    z = r[:, None] * _random_directions(rng, r.size, d)
    size = float(np.max(np.abs(K(z)) * r ** d))

    levels = np.arange(1, Nj + tmin_extra + 1)
    omega = []
    for i in levels:
        t = 2.0 ** (-int(i))
        r = sample_radii(pairs, t)
        u = _random_directions(rng, pairs, d)
        z = r[:, None] * u
        h = t * r[:, None] * _random_directions(rng, pairs, d)
        q = np.abs(K(z + h) - K(z)) * r ** d
        omega.append(float(q.max()))
    omega = np.array(omega)
    # monotone envelope: omega(t) is a sup over ratios <= t
    env = np.maximum.accumulate(omega[::-1])[::-1]
    dini = float(np.sum(env) * math.log(2))
    tail = levels >= Nj + tmin_extra // 2
    slope = float(np.max(env[tail] / 2.0 ** (-levels[tail]))) / 2.0 ** Nj if tail.any() else float("nan")
    l2 = piece_l2_norm(kernel, schedule, j, grid) if grid is not None else float("nan")
    return PieceEstimates(j, Nj, l2, size, dini, small_t_slope=slope)


def annulus_sup_rim(kernel: RoughHomogeneous, k: int) -> float:
    """``sup |Omega| 2^(-kd)``: the supremum of ``|K_k|``, attained on the inner rim."""
    if kernel.d == 1:
        u = np.array([[1.0], [-1.0]])
    else:
        th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        u = np.stack([np.cos(th), np.sin(th)], axis=-1)
    return float(np.abs(kernel.omega_fn(u)).max()) * 2.0 ** (-k * kernel.d)


# ---------------------------------------------------------------------------
# experiment drivers


def scale_invariance_error(kernel: RoughHomogeneous, grid: Grid, levels=None) -> float:
    """``max |K_k hat(xi) - K_0 hat(2^k xi)|`` over grid frequencies and levels."""
    levels = resolvable_levels(grid) if levels is None else list(levels)
    xi = grid.frequencies()
    worst = 0.0
    for k in levels:
        a = multiplier_of_annulus(kernel, k, grid=grid)
        b = multiplier_of_annulus(kernel, 0, xi=[2.0 ** k * x for x in xi])
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


def multiplier_envelope(kernel: RoughHomogeneous, grid: Grid, levels=None,
                        bins: int = 60) -> dict:
    """Envelope fit of ``K_k hat(xi)`` against ``eta = 2^k |xi|`` over all levels."""
    levels = resolvable_levels(grid) if levels is None else list(levels)
    xi = grid.frequencies()
    rho = _radius(xi).ravel()
    eta, vals = [], []
    for k in levels:
        eta.append(rho * 2.0 ** k)
        vals.append(multiplier_of_annulus(kernel, k, grid=grid).ravel())
    out = envelope_fit(np.concatenate(eta), np.concatenate(vals), bins)
    out["levels"] = levels
    return out


def _linfit(x, y) -> tuple[float, float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


def piece_decay_fit(kernel: RoughHomogeneous, schedule: Schedule, grid: Grid,
                    J: int = 6) -> dict:
    """Piece norms for ``j = 0..J`` and the fit of ``log2`` norm against ``N(j-1)``, ``j >= 1``."""
    if J < 3:
        raise InvalidInput("need J >= 3 for a fit")
    norms = [piece_l2_norm(kernel, schedule, j, grid) for j in range(J + 1)]
    x = [schedule(j - 1) for j in range(1, J + 1)]
    slope, icpt, r2 = _linfit(x, np.log2(norms[1:]))
    return {"norms": norms, "N_prev": x, "slope": slope, "intercept": icpt, "r2": r2,
            "alpha": -slope}


def kernel_estimate_fit(kernel: RoughHomogeneous, schedule: Schedule, J: int = 5,
                        pairs: int = 1000, seed: int = 0) -> dict:
    """Size constants and Dini integrals of the pieces ``j = 0..J``.

    Uniformity and the Dini fits use ``j = 1..J``: ``dini ~ c (1 + N(j))``
    through the origin (uncentered ``R^2``) and, for reference, an affine
    fit with centered ``R^2``.
    """
    rows = [piece_kernel_estimates(kernel, schedule, j, pairs=pairs, seed=seed)
            for j in range(J + 1)]
    tail = rows[1:]
    sizes = np.array([r.size_const for r in tail])
    x = np.array([1.0 + r.N for r in tail])
    dini = np.array([r.dini for r in tail])
    slope, icpt, r2 = _linfit(x, dini)
    # regression through the origin; uncentered R^2
    prop = float(np.dot(x, dini) / np.dot(x, x))
    r2_prop = 1.0 - float(np.sum((dini - prop * x) ** 2)) / float(np.dot(dini, dini))
    return {"rows": [r.as_row() for r in rows],
            "size_spread": float(sizes.max() / sizes.min()),
            "dini_slope": slope, "dini_intercept": icpt, "dini_r2": r2,
            "dini_prop_c": prop, "dini_prop_r2": r2_prop}
