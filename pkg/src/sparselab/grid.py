"""Uniform cell-midpoint grids on centered cubic domains."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .dyadic import Box, DyadicCube
from .errors import InvalidInput, ResolutionError

__all__ = ["Grid", "GridFunction", "cube_cell_slices"]


@dataclass(frozen=True)
class Grid:
    """``n**d`` cells of width ``L/n`` covering ``[-L/2, L/2)**d``."""

    d: int
    n: int
    L: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInput("dimension must be >= 1")
        if self.n < 2:
            raise InvalidInput("need at least 2 points per side")
        if not self.L > 0:
            raise InvalidInput("domain side must be positive")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def diameter(self) -> float:
        return self.L * np.sqrt(self.d)

    @property
    def cell_diagonal(self) -> float:
        return self.h * np.sqrt(self.d)

    def axis(self) -> np.ndarray:
        return -self.L / 2 + (np.arange(self.n) + 0.5) * self.h

    def mesh(self) -> list[np.ndarray]:
        ax = self.axis()
        return list(np.meshgrid(*([ax] * self.d), indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell midpoints as an array of shape ``(n**d, d)``."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(m * m for m in self.mesh()))

    def box(self) -> Box:
        lo = Fraction(-self.L / 2)
        hi = Fraction(self.L / 2)
        return Box((lo,) * self.d, (hi,) * self.d)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.d, self.n * factor, self.L)

    def frequencies(self) -> list[np.ndarray]:
        """Frequency meshes (cycles per unit length) in FFT order."""
        f = np.fft.fftfreq(self.n, d=self.h)
        return list(np.meshgrid(*([f] * self.d), indexing="ij"))


@dataclass
class GridFunction:
    """Samples of a function at the cell midpoints of ``grid``."""

    grid: Grid
    values: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            if v.size != self.grid.n ** self.grid.d:
                raise InvalidInput(
                    f"expected {self.grid.n ** self.grid.d} samples, got {v.size}")
            v = v.reshape(self.grid.shape)
        self.values = v

    @classmethod
    def from_callable(cls, grid: Grid, fn, periodic=False) -> "GridFunction":
        return cls(grid, np.asarray(fn(*grid.mesh())), periodic)

    @classmethod
    def zeros(cls, grid: Grid, dtype=float) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape, dtype=dtype))

    def with_values(self, values) -> "GridFunction":
        return replace(self, values=np.asarray(values).reshape(self.grid.shape))

    def integral(self) -> complex | float:
        return self.values.sum() * self.grid.cell_volume

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.cell_volume)

    def l2_norm(self) -> float:
        return float(np.sqrt((np.abs(self.values) ** 2).sum() * self.grid.cell_volume))

    def cube_mask(self, cube: DyadicCube) -> np.ndarray:
        return cube_mask(self.grid, cube)

    def cube_average(self, cube: DyadicCube, absolute=True) -> float:
        m = self.cube_mask(cube)
        v = np.abs(self.values[m]) if absolute else self.values[m]
        return v.mean()

    # serialization -------------------------------------------------------

    _MAGIC = b"SLGF"

    def to_bytes(self) -> bytes:
        """Flat binary: magic, d, n, L, dtype code, then C-order samples."""
        complex_ = np.iscomplexobj(self.values)
        head = self._MAGIC + struct.pack("<iidB", self.grid.d, self.grid.n,
                                         float(self.grid.L), 1 if complex_ else 0)
        arr = self.values.astype(np.complex128 if complex_ else np.float64)
        return head + arr.tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        if data[:4] != cls._MAGIC:
            raise InvalidInput("not a grid-function file")
        d, n, L, code = struct.unpack("<iidB", data[4:21])
        dtype = np.complex128 if code else np.float64
        grid = Grid(d, n, L)
        vals = np.frombuffer(data[21:], dtype=dtype).copy()
        return cls(grid, vals)

    def to_csv(self) -> str:
        pts = self.grid.points()
        v = self.values.ravel()
        cols = [f"x{i}" for i in range(self.grid.d)]
        if np.iscomplexobj(v):
            cols += ["re", "im"]
            rows = [list(p) + [z.real, z.imag] for p, z in zip(pts, v)]
        else:
            cols += ["value"]
            rows = [list(p) + [z] for p, z in zip(pts, v)]
        lines = [",".join(cols)]
        lines += [",".join(repr(float(x)) for x in r) for r in rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, L: float) -> "GridFunction":
        lines = [ln for ln in text.strip().splitlines() if ln]
        head = lines[0].split(",")
        d = sum(1 for c in head if c.startswith("x"))
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
        n = round(len(data) ** (1.0 / d))
        grid = Grid(d, n, L)
        if "im" in head:
            vals = data[:, d] + 1j * data[:, d + 1]
        else:
            vals = data[:, d]
        return cls(grid, vals)


def cube_cell_slices(grid: Grid, cube: DyadicCube) -> tuple:
    """Per-axis index ranges of the cells whose midpoints lie in ``cube``."""
    if cube.dim != grid.d:
        raise InvalidInput("cube/grid dimension mismatch")
    lo = [float(a) for a in cube.lower]
    hi = [float(b) for b in cube.upper]
    if any(a < -grid.L / 2 - 1e-12 * grid.L or b > grid.L / 2 + 1e-12 * grid.L
           for a, b in zip(lo, hi)):
        raise InvalidInput(f"cube {cube} not inside the grid domain")
    out = []
    for a, b in zip(lo, hi):
        # midpoint x_i = -L/2 + (i + 1/2) h lies in [a, b)
        i0 = int(np.ceil((a + grid.L / 2) / grid.h - 0.5))
        i1 = int(np.ceil((b + grid.L / 2) / grid.h - 0.5))
        out.append(slice(max(i0, 0), min(i1, grid.n)))
    if any(s.stop - s.start < 1 for s in out):
        raise ResolutionError(f"cube {cube} is smaller than one grid cell")
    return tuple(out)


def cube_mask(grid: Grid, cube: DyadicCube) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[cube_cell_slices(grid, cube)] = True
    return mask
