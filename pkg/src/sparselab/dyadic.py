"""Adjacent dyadic systems with exact rational coordinates.

A cube of the system with shift ``alpha`` is

    2**-k * ([0, 1)**d + m + (-1)**k * alpha / 3),   alpha in {0, 1, 2}**d.

All coordinates are kept as :class:`fractions.Fraction` so that membership,
containment and the covering lemmas are decided exactly.  Floats passed in
as points are converted exactly (every float is a dyadic rational).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

from .errors import InternalDefect, InvalidInput

__all__ = [
    "Box",
    "DyadicCube",
    "LevelWindow",
    "DEFAULT_WINDOW",
    "cube_bounds",
    "children",
    "contains",
    "cover_ball",
    "cover_ball_within",
    "all_shifts",
    "cubes_in_box",
    "covering_trials",
]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(float(x))


@lru_cache(maxsize=512)
def _pow2(k: int) -> Fraction:
    return Fraction(2) ** k


def _sign(level: int) -> int:
    return 1 if level % 2 == 0 else -1


@dataclass(frozen=True)
class LevelWindow:
    """Inclusive range of admissible levels ``k`` (side ``2**-k``)."""

    kmin: int = -60
    kmax: int = 60

    def check(self, level: int) -> None:
        if not self.kmin <= level <= self.kmax:
            raise InvalidInput(
                f"level {level} outside window [{self.kmin}, {self.kmax}]")


DEFAULT_WINDOW = LevelWindow()


@dataclass(frozen=True)
class Box:
    """Half-open product of intervals ``[lower_i, upper_i)``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise InvalidInput("lower/upper dimension mismatch")
        if any(a >= b for a, b in zip(self.lower, self.upper)):
            raise InvalidInput("Box requires lower < upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def measure(self) -> Fraction:
        out = Fraction(1)
        for a, b in zip(self.lower, self.upper):
            out *= _frac(b) - _frac(a)
        return out

    def contains(self, point) -> bool:
        return all(_frac(a) <= _frac(x) < _frac(b)
                   for a, x, b in zip(self.lower, point, self.upper))

    def contains_box(self, other: "Box") -> bool:
        return all(_frac(a) <= _frac(c) and _frac(e) <= _frac(b)
                   for a, b, c, e in zip(self.lower, self.upper,
                                         other.lower, other.upper))

    def contains_ball(self, center, radius) -> bool:
        """Open ball ``B(center, radius)`` inside the half-open box."""
        r = _frac(radius)
        return all(_frac(a) <= _frac(c) - r and _frac(c) + r <= _frac(b)
                   for a, c, b in zip(self.lower, center, self.upper))

    def as_float(self):
        return (tuple(float(a) for a in self.lower),
                tuple(float(b) for b in self.upper))


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Cube of the adjacent dyadic system ``D^alpha`` at level ``k``."""

    alpha: tuple
    level: int
    index: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        object.__setattr__(self, "index", tuple(int(m) for m in self.index))
        object.__setattr__(self, "level", int(self.level))
        if len(self.alpha) != len(self.index):
            raise InvalidInput("alpha and index must have the same length")
        if any(a not in (0, 1, 2) for a in self.alpha):
            raise InvalidInput(f"alpha entries must be in {{0,1,2}}: {self.alpha}")

    @property
    def dim(self) -> int:
        return len(self.alpha)

    @property
    def side(self) -> Fraction:
        return _pow2(-self.level)

    @property
    def measure(self) -> Fraction:
        return self.side ** self.dim

    @cached_property
    def lower(self) -> tuple:
        s = _sign(self.level)
        scale = _pow2(-self.level)
        return tuple(scale * (m + Fraction(s * a, 3))
                     for a, m in zip(self.alpha, self.index))

    @cached_property
    def upper(self) -> tuple:
        side = self.side
        return tuple(a + side for a in self.lower)

    @property
    def center(self) -> tuple:
        half = self.side / 2
        return tuple(a + half for a in self.lower)

    def bounds(self) -> Box:
        return Box(self.lower, self.upper)

    def parent(self) -> "DyadicCube":
        # the parent is the unique level k-1 cube of the same system
        # containing the lower corner
        return locate(self.lower, self.alpha, self.level - 1)

    def children(self) -> list["DyadicCube"]:
        return children(self)

    def contains(self, point) -> bool:
        return contains(self, point)

    def is_subset(self, other: "DyadicCube") -> bool:
        return other.bounds().contains_box(self.bounds())

    def to_record(self) -> dict:
        return {"alpha": list(self.alpha), "level": self.level,
                "index": list(self.index)}

    @classmethod
    def from_record(cls, rec: dict) -> "DyadicCube":
        return cls(tuple(rec["alpha"]), int(rec["level"]), tuple(rec["index"]))


def all_shifts(d: int) -> list[tuple]:
    """The ``3**d`` shift vectors in lexicographic order."""
    return [tuple(a) for a in product((0, 1, 2), repeat=d)]


def cube_bounds(cube: DyadicCube) -> Box:
    """Realized half-open box of ``cube``."""
    return cube.bounds()


def _locate_1d(x: Fraction, alpha: int, level: int) -> int:
    # index m with 2^-k (m + s*alpha/3) <= x < 2^-k (m + 1 + s*alpha/3)
    s = _sign(level)
    t = x * _pow2(level) - Fraction(s * alpha, 3)
    return math.floor(t)


def locate(point, alpha: Sequence[int], level: int) -> DyadicCube:
    """The cube of ``D^alpha`` at ``level`` containing ``point``."""
    pt = [_frac(x) for x in point]
    idx = tuple(_locate_1d(x, a, level) for x, a in zip(pt, alpha))
    return DyadicCube(tuple(alpha), level, idx)


def children(cube: DyadicCube) -> list[DyadicCube]:
    """The ``2**d`` level ``k+1`` cubes of the same system partitioning ``cube``."""
    k1 = cube.level + 1
    per_dim = []
    for a, lo in zip(cube.alpha, cube.lower):
        m0 = _locate_1d(lo, a, k1)
        per_dim.append((m0, m0 + 1))
    out = [DyadicCube(cube.alpha, k1, tuple(idx)) for idx in product(*per_dim)]
    if sum(c.measure for c in out) != cube.measure:  # pragma: no cover
        raise InternalDefect("children do not tile the parent")
    return out


def contains(cube: DyadicCube, point) -> bool:
    return cube.bounds().contains(point)


_THIRDS = {j: Fraction(j, 3) for j in range(-2, 3)}


def _level_for_radius(r: Fraction) -> int:
    # unique k with 6r < 2^-k <= 12r, i.e. k = -floor(log2(12r)), exactly
    num, den = 12 * r.numerator, r.denominator
    e = num.bit_length() - den.bit_length()
    # floor(log2(num/den)) is e or e - 1
    if (num << max(-e, 0)) < (den << max(e, 0)):
        e -= 1
    return -e


def cover_ball(center, radius, window: LevelWindow = DEFAULT_WINDOW) -> DyadicCube:
    """Cube ``Q`` of some ``D^alpha`` with ``B(center, radius)`` in ``Q``
    and ``6 radius < side(Q) <= 12 radius``.

    Ties between shifts are broken lexicographically on ``alpha``; the
    level is unique.
    """
    r = _frac(radius)
    if r <= 0:
        raise InvalidInput("radius must be positive")
    c = [_frac(x) for x in center]
    k = _level_for_radius(r)
    window.check(k)
    side = _pow2(-k)
    s = _sign(k)
    scale = _pow2(k)
    alpha, index = [], []
    for ci in c:
        # work in units of the side length
        t = (ci - r) * scale
        u = (ci + r) * scale
        for a in (0, 1, 2):
            off = _THIRDS[s * a]
            m = math.floor(t - off)
            if u <= m + 1 + off:
                alpha.append(a)
                index.append(m)
                break
        else:
            raise InternalDefect(
                f"covering lemma failed for center={center}, radius={radius}")
    return DyadicCube(tuple(alpha), k, tuple(index))


def cover_ball_within(q0: DyadicCube, center, radius,
                      window: LevelWindow = DEFAULT_WINDOW) -> DyadicCube:
    """Cube ``Q`` of the union of all systems with ``B ⊆ Q ⊆ q0`` and
    ``side(Q) <= 12 radius``; returns ``q0`` when ``12 radius >= side(q0)``.

    Per coordinate: take the descendant interval ``I`` of ``q0`` holding the
    left end of the ball; if the ball spills over its right end, shift ``I``
    right by a third of its length.
    """
    r = _frac(radius)
    if r <= 0:
        raise InvalidInput("radius must be positive")
    c = [_frac(x) for x in center]
    lower, upper = q0.lower, q0.upper
    if not all(a <= ci - r and ci + r <= b for a, ci, b in zip(lower, c, upper)):
        raise InvalidInput("ball is not contained in q0")
    if 12 * r >= q0.side:
        return q0
    # k >= 1 with 6r < 2^-k side(q0) <= 12r
    K = _level_for_radius(r)
    window.check(K)
    alpha, index = [], []
    for ci, a0, lo0, hi0 in zip(c, q0.alpha, lower, upper):
        a, m = _within_axis(ci, r, a0, K, lo0, hi0)
        alpha.append(a)
        index.append(m)
    return DyadicCube(tuple(alpha), K, tuple(index))


@lru_cache(maxsize=1 << 16)
def _within_axis(ci: Fraction, r: Fraction, a0: int, K: int,
                 lo0: Fraction, hi0: Fraction) -> tuple:
    side = _pow2(-K)
    s = _sign(K)
    m = _locate_1d(ci - r, a0, K)
    lo = side * (m + Fraction(s * a0, 3))
    if ci + r > lo + side:
        j = 3 * m + s * a0 + 1  # lower corner in units of side/3
        a1 = next(a for a in (0, 1, 2) if (j - s * a) % 3 == 0)
        m, a0 = (j - s * a1) // 3, a1
        lo = side * (m + Fraction(s * a0, 3))
    if not (lo <= ci - r and ci + r <= lo + side and lo0 <= lo and lo + side <= hi0):
        raise InternalDefect(
            f"modified covering lemma failed on an axis: c={ci}, r={r}, level={K}")
    return a0, m


def cubes_in_box(alpha: Sequence[int], level: int, box: Box) -> list[DyadicCube]:
    """All cubes of ``D^alpha`` at ``level`` whose realized box lies in ``box``."""
    side = _pow2(-level)
    s = _sign(level)
    ranges = []
    for a, lo, hi in zip(alpha, box.lower, box.upper):
        off = Fraction(s * a, 3)
        mlo = math.ceil(_frac(lo) / side - off)
        mhi = math.floor(_frac(hi) / side - off) - 1
        ranges.append(range(mlo, mhi + 1))
    return [DyadicCube(tuple(alpha), level, idx) for idx in product(*ranges)]


def integer_boxes(cubes: Sequence[DyadicCube], top: int | None = None):
    """Exact integer lower corners and sides in units of ``2**-top / 3``.

    Returns ``(lower, side, top)`` with ``lower`` of shape ``(n, d)``.
    """
    cubes = list(cubes)
    if not cubes:
        return [], [], top
    K = max(q.level for q in cubes) if top is None else top
    lower, side = [], []
    for q in cubes:
        e = K - q.level
        if e < 0:
            raise InvalidInput("top level below a cube level")
        s = _sign(q.level)
        lower.append(tuple(3 * (2 ** e) * m + s * a * (2 ** e)
                           for a, m in zip(q.alpha, q.index)))
        side.append(3 * 2 ** e)
    return lower, side, K


def maximal_cubes(cubes: Iterable[DyadicCube]) -> list[DyadicCube]:
    """Cubes not strictly contained in another member (duplicates collapsed)."""
    import numpy as np

    uniq = sorted(set(cubes), key=lambda q: (q.level, q.alpha, q.index))
    if len(uniq) <= 1:
        return uniq
    lower, side, _ = integer_boxes(uniq)
    if max(side) < 2 ** 60 and max(abs(x) for lo in lower for x in lo) < 2 ** 60:
        lo = np.array(lower, dtype=np.int64)
        sd = np.array(side, dtype=np.int64)
    else:  # pragma: no cover - extreme level spans
        lo = np.array(lower, dtype=object)
        sd = np.array(side, dtype=object)
    hi = lo + sd[:, None]
    keep = []
    for i, q in enumerate(uniq):
        inside = np.all((lo <= lo[i]) & (hi[i] <= hi), axis=1)
        inside[i] = False
        # equal boxes cannot occur twice (duplicates were collapsed and
        # distinct systems realize distinct boxes at a given level)
        if not inside.any():
            keep.append(q)
    return keep


_GRAIN = 2 ** 30


def _holds_ball(q: DyadicCube, c, r) -> bool:
    return all(a <= x - r and x + r <= b for a, x, b in zip(q.lower, c, q.upper))


def covering_trials(d: int, trials: int = 10_000, seed: int = 0) -> dict:
    """Random-ball test of both covering lemmas, checked in exact arithmetic.

    Centres are uniform in ``[-1, 1]^d`` and radii log-uniform in
    ``[1e-4, 1]``, both rounded to multiples of ``2^-30``; the ambient cube for the localized version covers a
    concentric ball larger by a random factor in ``[1, 64]`` and shifted
    so the original ball stays inside it.
    """
    import numpy as np

    rng = np.random.default_rng(seed)
    fail_cover = fail_within = 0
    for _ in range(trials):
        c = [Fraction(int(x), _GRAIN) for x in rng.integers(-_GRAIN, _GRAIN, d)]
        r = Fraction(max(1, round(10 ** rng.uniform(-4, 0) * _GRAIN)), _GRAIN)
        q = cover_ball(c, r)
        if not (_holds_ball(q, c, r) and 6 * r < q.side <= 12 * r):
            fail_cover += 1
        grow = Fraction(int(rng.integers(64, 64 * 64)), 64)
        shift = [Fraction(int(u), 1024) * (grow - 1) * r
                 for u in rng.integers(-1024, 1025, d) // math.ceil(math.sqrt(d))]
        q0 = cover_ball([a + b for a, b in zip(c, shift)], grow * r)
        q1 = cover_ball_within(q0, c, r)
        inside = all(a0 <= a1 and b1 <= b0 for a0, a1, b0, b1
                     in zip(q0.lower, q1.lower, q0.upper, q1.upper))
        if not (_holds_ball(q1, c, r) and inside and (q1.side <= 12 * r or q1 == q0)):
            fail_within += 1
    return {"d": d, "trials": trials, "seed": seed,
            "cover_failures": fail_cover, "within_failures": fail_within}
