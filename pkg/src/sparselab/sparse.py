"""Stopping-time construction of sparse collections and their verification.

The construction runs on one :class:`~sparselab.operators.TruncationLadder`
per input: every localized maximal truncation ``T_{sharp,Q} f`` is read off
the cumulative truncations ``C_i = T_{r_0, r_i} f`` by restricting the
ladder index to ``r_i <= dist(x, boundary Q) / 2``.

Cubes may extend past the grid domain (the outer cubes of the tail family
always do); ``f`` is zero there, so cube averages count every lattice
midpoint of the cube but only sum the sampled ones.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (DyadicCube, cover_ball, cover_ball_within, integer_boxes,
                     maximal_cubes)
from .errors import InternalDefect, InvalidInput, ResolutionError
from .grid import Grid, GridFunction
from .maximal import DEFAULT_RHO
from .operators import RadiiSet, SmoothCZ, TruncationLadder

__all__ = [
    "StoppingConfig",
    "StoppingResult",
    "SparseCollection",
    "SparseContext",
    "stopping_cubes",
    "build_sparse",
    "sparse_apply",
    "verify_sparseness",
    "verify_domination",
    "sparse_weighted_bound_check",
    "counting_bound_check",
    "random_test_function",
    "domination_trial",
]


@dataclass(frozen=True)
class StoppingConfig:
    """Parameters of the stopping-time construction.

    ``c_multiplier`` is the factor in ``C_T^0 = c (||T|| + C_K + Dini)``;
    it is doubled (per stopping call) until the small-size condition holds.
    """

    eps_d: float | None = None
    c_multiplier: float = 1.0
    rho: float = DEFAULT_RHO
    max_doublings: int = 30
    noise: float = 1e-9
    min_top_cells: int = 256

    def eps_for(self, d: int) -> float:
        eps = 1.0 / (4 * 5 * 3 ** (2 * d)) if self.eps_d is None else self.eps_d
        if not 0 < eps <= 1.0 / (2 * 5 * 3 ** (2 * d)):
            raise InvalidInput("eps_d must lie in (0, 1/(10 * 9^d)]")
        return eps


class SparseContext:
    """Everything the construction needs about one input ``f``."""

    def __init__(self, kernel, f: GridFunction, radii: RadiiSet | None = None,
                 l2_norm: float | None = None, noise: float = 1e-9,
                 rho: float = DEFAULT_RHO):
        g = f.grid
        self.kernel, self.f, self.grid = kernel, f, g
        if radii is None:
            radii = RadiiSet.ladder(g.cell_diagonal, g.diameter, rho)
        self.ladder = TruncationLadder(kernel, f, radii)
        if l2_norm is None:
            l2_norm = kernel.l2_norm
        if l2_norm is None:
            from .normlab import truncated_operator_norm
            l2_norm = truncated_operator_norm(kernel, g).value
        self.l2_norm = float(l2_norm)
        ck = kernel.size_const if isinstance(kernel, SmoothCZ) else getattr(kernel, "omega_sup", 0.0)
        dini = kernel.dini if isinstance(kernel, SmoothCZ) else 0.0
        self.size_const = float(ck)
        self.cz = self.l2_norm + ck + dini
        self.absf = np.abs(np.asarray(f.values))
        self._prefix = self.absf
        for ax in range(g.d):
            self._prefix = np.cumsum(self._prefix, axis=ax)
        self._prefix = np.pad(self._prefix, [(1, 0)] * g.d)
        scale = float(np.abs(self.ladder.C).max()) if self.ladder.C.size else 0.0
        self.tol = noise * max(scale, 1e-300)
        self.axis = g.axis()

    # -- cube geometry on the lattice ------------------------------------

    def cell_range(self, cube: DyadicCube):
        """Unclipped per-axis midpoint index ranges ``[i0, i1)`` of ``cube``."""
        g = self.grid
        out = []
        for a, b in zip(cube.lower, cube.upper):
            i0 = math.ceil((float(a) + g.L / 2) / g.h - 0.5)
            i1 = math.ceil((float(b) + g.L / 2) / g.h - 0.5)
            out.append((i0, i1))
        return out

    def slices(self, cube: DyadicCube):
        n = self.grid.n
        return tuple(slice(min(max(i0, 0), n), min(max(i1, 0), n))
                     for i0, i1 in self.cell_range(cube))

    def count(self, cube: DyadicCube) -> int:
        c = 1
        for i0, i1 in self.cell_range(cube):
            c *= i1 - i0
        if c < 1:
            raise ResolutionError(f"cube {cube} holds no lattice midpoint")
        return c

    def average(self, cube: DyadicCube) -> float:
        """``<|f|>_Q`` with every lattice midpoint of ``Q`` counted."""
        sl = self.slices(cube)
        if any(s.stop <= s.start for s in sl):
            return 0.0
        P = self._prefix
        if self.grid.d == 1:
            total = P[sl[0].stop] - P[sl[0].start]
        else:
            a1, b1, a2, b2 = sl[0].start, sl[0].stop, sl[1].start, sl[1].stop
            total = P[b1, b2] - P[a1, b2] - P[b1, a2] + P[a1, a2]
        return float(total) / self.count(cube)

    def inside_domain(self, cube: DyadicCube) -> bool:
        half = self.grid.L / 2
        return all(float(a) >= -half and float(b) <= half
                   for a, b in zip(cube.lower, cube.upper))

    # -- localized maximal truncations -----------------------------------

    def local(self, cube: DyadicCube):
        """``(slices, B, T_{sharp,Q} f)`` on the cells of ``cube``."""
        sl = self.slices(cube)
        if any(s.stop <= s.start for s in sl):
            return sl, None, None
        dist = None
        for ax, (s, a, b) in enumerate(zip(sl, cube.lower, cube.upper)):
            x = self.axis[s]
            dx = np.minimum(x - float(a), float(b) - x)
            shape = [1] * self.grid.d
            shape[ax] = x.size
            dx = dx.reshape(shape)
            dist = dx if dist is None else np.minimum(dist, dx)
        dist = np.broadcast_to(dist, tuple(s.stop - s.start for s in sl))
        B = self.ladder.admissible_index(dist)
        D = self.ladder.prefix_diameter[(slice(None),) + sl]
        val = np.take_along_axis(D, np.clip(B, 0, None)[None], axis=0)[0]
        return sl, B, np.where(B >= 1, val, 0.0)


@dataclass
class StoppingResult:
    cubes: list
    ct0: float
    doublings: int
    e0_size: int
    small_size: float          # sum |Q| / |Q0|
    cond1: bool
    cond2: bool
    cond3: bool
    e0_in_domain: bool


def _suffix_sigma(C: np.ndarray, B: np.ndarray, lam: float) -> np.ndarray:
    """Smallest ``s`` with ``max_{s <= a < b <= B} |C_b - C_a| <= lam``.

    ``C`` has shape ``(M, npts)``; ``B`` holds per-point top indices.
    """
    npts = C.shape[1]
    s = B.copy()
    active = np.ones(npts, dtype=bool)
    cols = np.arange(npts)
    top = C[B, cols]
    if np.iscomplexobj(C):
        diam = np.zeros(npts)
        for j in range(int(B.max()) - 1, -1, -1):
            cand = active & (j < B)
            if not cand.any():
                continue
            idx = cols[cand]
            seg = np.arange(j + 1, int(B.max()) + 1)
            block = C[seg][:, idx]
            mask = seg[:, None] <= B[idx][None, :]
            dj = np.where(mask, np.abs(block - C[j, idx][None, :]), 0.0).max(axis=0)
            newd = np.maximum(diam[idx], dj)
            ok = newd <= lam
            diam[idx] = newd
            s[idx[ok]] = j
            active[idx[~ok]] = False
        return s
    hi = top.copy()
    lo = top.copy()
    for j in range(int(B.max()) - 1, -1, -1):
        cand = active & (j < B)
        if not cand.any():
            continue
        idx = cols[cand]
        hi[idx] = np.maximum(hi[idx], C[j, idx])
        lo[idx] = np.minimum(lo[idx], C[j, idx])
        ok = hi[idx] - lo[idx] <= lam
        s[idx[ok]] = j
        active[idx[~ok]] = False
    return s


def _nested_free(cubes) -> bool:
    return len(maximal_cubes(cubes)) == len(set(cubes))


def stopping_cubes(q0: DyadicCube, ctx: SparseContext, config: StoppingConfig,
                   ct0: float | None = None) -> StoppingResult:
    """The stopping cubes of ``q0`` with the three defining conditions checked.

    ``E_0 = {x in q0 : T_{sharp,q0} f(x) > C_T^0 <|f|>_{q0}}``; each ``x`` in
    ``E_0`` gets the smallest ladder index ``s`` beyond which every
    truncation pair stays below the threshold, and the ball ``B(x, 2 r_s)``
    is covered inside ``q0``.  The inclusion-maximal covers are returned.
    """
    g = ctx.grid
    eps_d = config.eps_for(g.d)
    if ct0 is None:
        ct0 = config.c_multiplier * ctx.cz
    avg = ctx.average(q0)
    sl, B, T = ctx.local(q0)
    q0_measure = float(q0.measure)
    if T is None:
        return StoppingResult([], ct0, 0, 0, 0.0, True, True, True, True)
    r = ctx.ladder.r
    C = ctx.ladder.C[(slice(None),) + sl]
    shape = T.shape
    mesh = np.meshgrid(*[ctx.axis[s] for s in sl], indexing="ij")
    doublings = 0
    while True:
        lam = ct0 * avg
        e0 = T > lam + ctx.tol
        e0_in_domain = True
        if not ctx.inside_domain(q0):
            # outside the grid every truncation is bounded by C_K ||f||_1 / D^d,
            # D the distance from the sampled support to the domain boundary
            e0_in_domain = _outside_bound(ctx) <= lam
        if not e0.any():
            cubes = []
            break
        idx = np.nonzero(e0.ravel())[0]
        Cf = C.reshape(C.shape[0], -1)[:, idx]
        Bf = B.ravel()[idx]
        s = _suffix_sigma(Cf, Bf, lam)
        if np.any(s < 1):  # pragma: no cover
            raise InternalDefect("point of E_0 with no admissible stopping radius")
        # every cover has side >= 12 r_s (or is q0 itself): cheap rejection
        side0 = float(q0.side)
        rs = r[s]
        lb = np.where(24 * rs >= side0, side0, 12 * rs).max() ** g.d
        if lb >= eps_d * q0_measure:
            ct0 *= 2
            doublings += 1
            if doublings > config.max_doublings:
                raise InternalDefect(f"small-size condition fails on {q0}")
            continue
        pts = np.stack([m.ravel()[idx] for m in mesh], axis=1)
        seen = {}
        for p, si in zip(pts, s):
            key = (tuple(p), int(si))
            if key not in seen:
                seen[key] = cover_ball_within(q0, tuple(float(c) for c in p), 2 * r[si])
        cubes = maximal_cubes(seen.values())
        small = sum(float(q.measure) for q in cubes) / q0_measure
        if small < eps_d:
            break
        ct0 *= 2
        doublings += 1
        if doublings > config.max_doublings:
            raise InternalDefect(
                f"small-size condition still fails after {doublings} doublings "
                f"on {q0}: sum|Q|/|Q0| = {small:.3g}")
    small = sum(float(q.measure) for q in cubes) / q0_measure
    # condition (3) on the grid
    bound = np.full(shape, ct0 * avg + ctx.tol)
    best = np.zeros(shape)
    origin = [s.start for s in sl]
    for q in cubes:
        qsl, _, Tq = ctx.local(q)
        if Tq is None:
            continue
        loc = tuple(slice(s.start - o, s.stop - o) for s, o in zip(qsl, origin))
        np.maximum(best[loc], Tq, out=best[loc])
    cond3 = bool(np.all(T <= bound + best))
    return StoppingResult(cubes, ct0, doublings, int(e0.sum()), small,
                          small < eps_d, _nested_free(cubes) if cubes else True,
                          cond3, e0_in_domain)


def _outside_bound(ctx: SparseContext) -> float:
    g = ctx.grid
    if not hasattr(ctx, "_outside"):
        nz = np.nonzero(ctx.absf)
        if nz[0].size == 0:
            ctx._outside = 0.0
        else:
            dmin = min(min(int(ix.min()), g.n - 1 - int(ix.max())) for ix in nz)
            D = (dmin + 0.5) * g.h
            ctx._outside = ctx.size_const * float(ctx.absf.sum() * g.cell_volume) / D ** g.d
    return ctx._outside


# ---------------------------------------------------------------------------
# collections


@dataclass
class SparseCollection:
    """Cubes split by shift, with a per-cube sparseness certificate."""

    by_shift: dict
    certificate: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    @classmethod
    def from_cubes(cls, cubes, report=None) -> "SparseCollection":
        by = defaultdict(list)
        for q in set(cubes):
            by[q.alpha].append(q)
        by = {a: sorted(v) for a, v in sorted(by.items())}
        out = cls(by, {}, dict(report or {}))
        out.certificate = _certificate(out)
        return out

    @property
    def cubes(self) -> list:
        return [q for a in self.by_shift for q in self.by_shift[a]]

    def __len__(self):
        return sum(len(v) for v in self.by_shift.values())

    def to_record(self) -> dict:
        return {
            "by_shift": {",".join(map(str, a)): [q.to_record() for q in v]
                         for a, v in self.by_shift.items()},
            "certificate": [{"cube": q.to_record(), "fraction": fr}
                            for q, fr in self.certificate.items()],
            "report": self.report,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SparseCollection":
        cubes = [DyadicCube.from_record(c) for v in rec["by_shift"].values() for c in v]
        return cls.from_cubes(cubes, rec.get("report"))


def _strict_sub_fraction(cubes):
    """For nested-or-disjoint cubes: ``|union of strict subcubes| / |Q|``."""
    if not cubes:
        return {}
    lower, side, _ = integer_boxes(cubes)
    lo = np.array(lower, dtype=object)
    sd = np.array(side, dtype=object)
    hi = lo + sd[:, None]
    out = {}
    d = lo.shape[1]
    for i, q in enumerate(cubes):
        inside = np.all((lo >= lo[i]) & (hi <= hi[i]), axis=1)
        inside[i] = False
        sub = [cubes[j] for j in np.nonzero(inside)[0]]
        top = maximal_cubes(sub)
        num = sum(q2.measure for q2 in top)
        out[q] = float(num / q.measure)
    return out


def _certificate(coll: SparseCollection) -> dict:
    cert = {}
    for a, cubes in coll.by_shift.items():
        cert.update(_strict_sub_fraction(cubes))
    return cert


def verify_sparseness(collection: SparseCollection, eta: float = 0.5) -> dict:
    """Exact check of ``|union of strict subcubes| <= eta |Q|`` per shift."""
    cert = _certificate(collection)
    if not cert:
        return {"pass": True, "worst_cube": None, "worst_fraction": 0.0}
    worst = max(cert, key=cert.get)
    return {"pass": cert[worst] <= eta, "worst_cube": worst,
            "worst_fraction": cert[worst]}


def _union_measure(cubes) -> float:
    """Exact Lebesgue measure of a union of cubes (coordinate compression)."""
    if not cubes:
        return 0.0
    lower, side, K = integer_boxes(cubes)
    d = len(lower[0])
    boxes = [(lo, tuple(x + s for x in lo)) for lo, s in zip(lower, side)]
    unit = (2.0 ** (-K) / 3.0) ** d
    if d == 1:
        iv = sorted((b[0][0], b[1][0]) for b in boxes)
        total, cur_a, cur_b = 0, None, None
        for a, b in iv:
            if cur_b is None or a > cur_b:
                if cur_b is not None:
                    total += cur_b - cur_a
                cur_a, cur_b = a, b
            else:
                cur_b = max(cur_b, b)
        total += cur_b - cur_a
        return float(total) * unit
    xs = sorted({b[0][0] for b in boxes} | {b[1][0] for b in boxes})
    ys = sorted({b[0][1] for b in boxes} | {b[1][1] for b in boxes})
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    cover = np.zeros((len(xs) - 1, len(ys) - 1), dtype=bool)
    for lo, hi in boxes:
        cover[xi[lo[0]]:xi[hi[0]], yi[lo[1]]:yi[hi[1]]] = True
    dx = np.diff(np.array(xs, dtype=float))
    dy = np.diff(np.array(ys, dtype=float))
    return float((cover * np.outer(dx, dy)).sum()) * unit


def counting_bound_check(cubes, eps_d: float) -> dict:
    """``|union of strict subcubes (all shifts)| <= 5 * 9^d * eps_d |Q|``."""
    cubes = sorted(set(cubes))
    if not cubes:
        return {"pass": True, "worst_fraction": 0.0, "bound": 0.0}
    d = cubes[0].dim
    bound = 5 * 3 ** (2 * d) * eps_d
    lower, side, _ = integer_boxes(cubes)
    lo = np.array(lower, dtype=object)
    hi = lo + np.array(side, dtype=object)[:, None]
    worst = 0.0
    for i, q in enumerate(cubes):
        inside = np.all((lo >= lo[i]) & (hi <= hi[i]), axis=1)
        inside[i] = False
        sub = [cubes[j] for j in np.nonzero(inside)[0]]
        if sub:
            worst = max(worst, _union_measure(sub) / float(q.measure))
    return {"pass": worst <= bound, "worst_fraction": worst, "bound": bound}


def _tail_cubes(center, radius, grid: Grid, rho: float):
    """``P_0`` covering ``2B`` and the growing tail ``P_1, P_2, ...``."""
    d = grid.d
    p0 = cover_ball(center, 2 * radius)
    ell = float(p0.side)
    # every x in P_0 must see a ladder radius >= diam(P_0) below dist(x, dP_1)/2
    kappa = 2 * rho * math.sqrt(d) + 0.5
    c0 = [float(c) for c in p0.center]
    tail = [cover_ball(c0, kappa * ell * math.sqrt(d))]
    half = grid.L / 2
    while not all(float(a) <= -half and float(b) >= half
                  for a, b in zip(tail[-1].lower, tail[-1].upper)):
        prev = tail[-1]
        tail.append(cover_ball([float(c) for c in prev.center],
                               float(prev.side) * math.sqrt(d)))
    return p0, tail, kappa


def build_sparse(kernel, f: GridFunction, center, radius: float,
                 config: StoppingConfig = StoppingConfig(),
                 radii: RadiiSet | None = None, l2_norm: float | None = None,
                 ctx: SparseContext | None = None) -> SparseCollection:
    """Sparse collection dominating ``T_sharp f`` for ``f`` supported in a ball."""
    g = f.grid
    center = tuple(float(c) for c in np.broadcast_to(center, (g.d,)))
    if not radius > 0:
        raise InvalidInput("support radius must be positive")
    dist2 = sum((m - c) ** 2 for m, c in zip(g.mesh(), center))
    if np.any((np.abs(f.values) > 0) & (dist2 >= radius ** 2)):
        raise InvalidInput("f is not supported inside the given ball")
    if ctx is None:
        ctx = SparseContext(kernel, f, radii, l2_norm, config.noise, config.rho)
    eps_d = config.eps_for(g.d)
    r = ctx.ladder.r
    rho = float(np.max(r[1:] / r[:-1])) if r.size > 1 else config.rho
    p0, tail, kappa = _tail_cubes(center, radius, g, rho)
    p1 = tail[0]
    if float(p1.side) / g.h < config.min_top_cells:
        raise ResolutionError("top cube resolved by fewer than min_top_cells cells")

    calls = []
    ct_used = {}
    parent = {}

    def run(q):
        res = stopping_cubes(q, ctx, config)
        calls.append(res)
        ct_used[q] = res.ct0
        return res.cubes

    P = run(p1)
    for q in P:
        parent.setdefault(q, p1)
    s_star = [p1]
    generations = 0
    while P:
        generations += 1
        lmax = max(q.side for q in P)
        pstar = sorted(q for q in P if q.side == lmax)
        s_star += pstar
        rest = [q for q in P if q.side != lmax]
        new = []
        for q in pstar:
            kids = run(q)
            for k in kids:
                # keep the lexicographically smallest candidate parent
                if k not in parent or q < parent[k]:
                    parent[k] = q
            new += kids
        P = maximal_cubes(rest + new)
    s_star = sorted(set(s_star))

    report = {
        "ct0_base": config.c_multiplier * ctx.cz,
        "ct0_max": max(ct_used.values()) if ct_used else config.c_multiplier * ctx.cz,
        "doublings": max((c.doublings for c in calls), default=0),
        "stopping_calls": len(calls),
        "generations": generations,
        "cond1": all(c.cond1 for c in calls),
        "cond2": all(c.cond2 for c in calls),
        "cond3": all(c.cond3 for c in calls),
        "e0_certified": all(c.e0_in_domain for c in calls),
        "worst_small_size": max((c.small_size for c in calls), default=0.0),
        "eps_d": eps_d,
        "kappa": kappa,
        "p0": p0.to_record(),
        "tail": [q.to_record() for q in tail],
        "cz": ctx.cz,
        "l2_norm": ctx.l2_norm,
    }
    # induction bound at termination: T_{sharp,P1} f <= sum_Q C_Q <|f|>_Q 1_Q
    lhs = ctx.local(p1)
    dom = np.zeros(g.shape)
    for q in s_star:
        sl = ctx.slices(q)
        if any(s.stop <= s.start for s in sl):
            continue
        dom[sl] += ct_used.get(q, report["ct0_base"]) * ctx.average(q)
    sl1, _, T1 = lhs
    report["induction_bound"] = bool(np.all(T1 <= dom[sl1] + ctx.tol))
    count = counting_bound_check([q for q in s_star if q != p1] + [p1], eps_d)
    report["counting_worst"] = count["worst_fraction"]
    report["counting_bound"] = count["bound"]
    report["counting_pass"] = count["pass"]
    # tail estimate outside P_0: T_sharp f <= c C_K <|f|>_{P_{n+1}} on P_{n+1} \ P_n
    sharp = ctx.ladder.sharp()
    tail_c = 0.0
    inner = p0
    mesh = g.mesh()
    prev_mask = _box_mask(mesh, inner)
    for q in tail:
        m = _box_mask(mesh, q) & ~prev_mask
        a = ctx.average(q)
        if m.any() and a > 0:
            tail_c = max(tail_c, float(sharp[m].max()) / (ctx.size_const * a))
        prev_mask |= m
    report["tail_constant"] = tail_c
    coll = SparseCollection.from_cubes(list(tail) + s_star, report)
    coll.report["s_star"] = [q.to_record() for q in s_star]
    return coll


def _box_mask(mesh, cube: DyadicCube) -> np.ndarray:
    m = np.ones(mesh[0].shape, dtype=bool)
    for x, a, b in zip(mesh, cube.lower, cube.upper):
        m &= (x >= float(a)) & (x < float(b))
    return m


# ---------------------------------------------------------------------------
# evaluation


class _SparseOperator:
    """``f -> sum_Q 1_Q <f>_Q`` as a symmetric linear map on grid arrays."""

    def __init__(self, collection: SparseCollection, grid: Grid):
        self.grid = grid
        ctx = _LatticeOnly(grid)
        self.items = []
        for q in collection.cubes:
            sl = ctx.slices(q)
            if any(s.stop <= s.start for s in sl):
                continue
            self.items.append((sl, ctx.count(q)))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=np.result_type(v, float))
        for sl, cnt in self.items:
            out[sl] += v[sl].sum() / cnt
        return out


class _LatticeOnly(SparseContext):
    def __init__(self, grid: Grid):  # geometry helpers only
        self.grid = grid
        self.axis = grid.axis()


def sparse_apply(collection: SparseCollection, f: GridFunction) -> GridFunction:
    """``sum_Q <|f|>_Q 1_Q`` over every shift."""
    op = _SparseOperator(collection, f.grid)
    return GridFunction(f.grid, op(np.abs(np.asarray(f.values))))


def verify_domination(kernel, f: GridFunction, collection: SparseCollection,
                      radii: RadiiSet | None = None, cz: float | None = None,
                      noise: float = 1e-9, ctx: SparseContext | None = None) -> dict:
    """``max T_sharp f / ((||T|| + C_K + Dini) A_S f)`` on the grid.

    Pass the ``SparseContext`` used for the construction to reuse its ladder.
    """
    if ctx is None:
        ctx = SparseContext(kernel, f, radii, noise=noise)
    if cz is None:
        cz = collection.report.get("cz", ctx.cz)
    lad = ctx.ladder
    sharp = lad.sharp()
    tol = noise * max(float(np.abs(lad.C).max()), 1e-300)
    a = sparse_apply(collection, f).values
    pos = a > 0
    if np.any(~pos & (sharp > tol)):
        return {"pass": False, "measured_constant": math.inf}
    if not pos.any():
        return {"pass": True, "measured_constant": 0.0}
    c = float(np.max(np.where(pos, sharp / (cz * np.where(pos, a, 1.0)), 0.0)))
    return {"pass": bool(np.isfinite(c)), "measured_constant": c}


def sparse_weighted_bound_check(collection: SparseCollection, w, p: float = 2.0,
                                trials: int = 8, seed: int = 0,
                                iterations: int = 200, family=None) -> dict:
    """Lower bound for ``||A_S||_{L^p(w)}`` and its ratio to ``{w}_{A_p}``.

    Inputs tried: random nonnegative functions, indicators of the
    collection's cubes, and the fixed point of the nonlinear power
    iteration for nonnegative operators (monotone in the ratio).
    """
    from .weights import characteristics

    if not p > 1:
        raise InvalidInput("p must exceed 1")
    g = w.grid
    op = _SparseOperator(collection, g)
    wv = w.array
    rng = np.random.default_rng(seed)

    def ratio(v):
        v = np.abs(v)
        den = (np.sum(v ** p * wv)) ** (1 / p)
        if den == 0:
            return 0.0
        return float((np.sum(op(v) ** p * wv)) ** (1 / p) / den)

    best = 0.0
    for _ in range(trials):
        best = max(best, ratio(rng.random(g.shape)))
    for sl, _ in op.items:
        v = np.zeros(g.shape)
        v[sl] = 1.0
        best = max(best, ratio(v))
    v = rng.random(g.shape) + 0.5
    history = []
    for _ in range(iterations):
        av = op(v)
        u = op(wv * av ** (p - 1)) / wv
        v_new = u ** (1 / (p - 1))
        nrm = np.sum(v_new ** p * wv) ** (1 / p)
        if nrm == 0:
            break
        v_new /= nrm
        history.append(ratio(v_new))
        if np.allclose(v_new, v, rtol=1e-10, atol=0):
            v = v_new
            break
        v = v_new
    if history:
        best = max(best, max(history))
    ch = characteristics(w, p, family)
    return {"norm_lower": best, "braces": ch.braces, "ratio": best / ch.braces,
            "seed": seed}


# ---------------------------------------------------------------------------
# experiment drivers


def random_test_function(grid: Grid, radius: float, pieces: int = 16, seed: int = 0,
                         center=None) -> GridFunction:
    """Nonnegative piecewise-constant function on a ``pieces^d`` partition,
    cut off to the open ball ``B(center, radius)``."""
    rng = np.random.default_rng(seed)
    center = (0.0,) * grid.d if center is None else tuple(center)
    coarse = rng.random((pieces,) * grid.d)
    mesh = grid.mesh()
    idx = tuple(np.clip(((x / grid.L + 0.5) * pieces).astype(int), 0, pieces - 1)
                for x in mesh)
    r = np.sqrt(sum((x - c) ** 2 for x, c in zip(mesh, center)))
    return GridFunction(grid, coarse[idx] * (r < radius))


def domination_trial(kernel, d: int, n: int, seed: int, radius: float = 0.25,
                     L: float = 1.0, pieces: int = 16, refine: bool = True,
                     config: StoppingConfig = StoppingConfig()) -> dict:
    """Build, verify and measure one sparse bound, optionally again on the refined grid."""
    out = {"seed": seed}
    sizes = [n, 2 * n] if refine else [n]
    consts = []
    for nn in sizes:
        g = Grid(d, nn, L)
        f = random_test_function(g, radius, pieces, seed)
        ctx = SparseContext(kernel, f, noise=config.noise, rho=config.rho)
        col = build_sparse(kernel, f, (0.0,) * d, radius, config, ctx=ctx)
        rep = col.report
        sp = verify_sparseness(col)
        dom = verify_domination(kernel, f, col, ctx=ctx)
        tag = f"n{nn}"
        out[f"{tag}_cubes"] = len(col)
        out[f"{tag}_doublings"] = rep["doublings"]
        out[f"{tag}_conditions"] = bool(rep["cond1"] and rep["cond2"] and rep["cond3"])
        out[f"{tag}_induction"] = bool(rep["induction_bound"])
        out[f"{tag}_counting"] = bool(rep["counting_pass"])
        out[f"{tag}_sparse"] = bool(sp["pass"])
        out[f"{tag}_dominated"] = bool(dom["pass"])
        out[f"{tag}_constant"] = dom["measured_constant"]
        consts.append(dom["measured_constant"])
    ok = all(v for k, v in out.items() if isinstance(v, bool))
    if refine:
        ratio = consts[1] / consts[0] if consts[0] > 0 else math.inf
        out["refine_ratio"] = ratio
        ok = ok and 0.5 <= ratio <= 2.0
    out["pass"] = bool(ok)
    return out
