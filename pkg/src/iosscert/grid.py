"""Axis-aligned evaluation grids over the box X x U x D.

A grid is a per-axis (lo, hi, count) triple for each of the n+q+m
coordinates, sampled uniformly including both endpoints; an axis with
count 1 collapses to the box midpoint.  Enumeration order is fixed:
row-major with the lowest axis varying fastest, so reports and argmax
tie-breaks are reproducible no matter how a sweep is partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lows: np.ndarray
    highs: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lows = np.asarray(self.lows, dtype=float)
        highs = np.asarray(self.highs, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if not (lows.ndim == highs.ndim == counts.ndim == 1):
            raise GridError("grid axes must be one-dimensional sequences")
        if not (lows.shape == highs.shape == counts.shape):
            raise GridError("lows, highs and counts must have equal length")
        if not (np.isfinite(lows).all() and np.isfinite(highs).all()):
            raise GridError("grid bounds must be finite")
        if (counts < 1).any():
            raise GridError("every axis needs at least one point")
        if (lows > highs).any():
            bad = int(np.argmax(lows > highs))
            raise GridError(f"axis {bad}: lower bound {lows[bad]} exceeds upper bound {highs[bad]}")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        object.__setattr__(self, "counts", counts)
        for arr in (lows, highs, counts):
            arr.setflags(write=False)

    @property
    def dim(self):
        return self.lows.shape[0]

    @property
    def total_points(self):
        return math.prod(int(c) for c in self.counts)

    def axis_values(self, axis):
        """Sample positions on one axis: uniform including endpoints,
        midpoint when count is 1."""
        lo, hi, c = float(self.lows[axis]), float(self.highs[axis]), int(self.counts[axis])
        if c == 1:
            return np.array([0.5 * (lo + hi)])
        return np.linspace(lo, hi, c)

    def block(self, start, stop):
        """Points start..stop-1 of the enumeration as a (stop-start, dim) array."""
        total = self.total_points
        if not (0 <= start <= stop <= total):
            raise GridError(f"block [{start}, {stop}) out of range for {total} points")
        idx = np.arange(start, stop, dtype=np.int64)
        out = np.empty((stop - start, self.dim), dtype=float)
        stride = 1
        for a in range(self.dim):
            c = int(self.counts[a])
            vals = self.axis_values(a)
            out[:, a] = vals[(idx // stride) % c]
            stride *= c
        return out

    def point(self, index):
        return self.block(index, index + 1)[0]


def grid_points(grid):
    """Iterate all points in enumeration order (lowest axis fastest)."""
    total = grid.total_points
    chunk = 65536
    for start in range(0, total, chunk):
        block = grid.block(start, min(start + chunk, total))
        yield from block


def grid_blocks(grid, chunk=65536):
    """Yield (start, block) pairs covering the enumeration in order."""
    total = grid.total_points
    for start in range(0, total, chunk):
        yield start, grid.block(start, min(start + chunk, total))


def run_blocks(grid, worker, chunk=65536, threads=1):
    """Run ``worker(start, block)`` over the whole enumeration.

    Results are yielded in block order regardless of thread count, so any
    reduction built on top is reproducible; workers must be pure.
    """
    total = grid.total_points
    ranges = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]
    if threads is None or threads <= 1 or len(ranges) <= 1:
        for s, e in ranges:
            yield worker(s, grid.block(s, e))
        return
    from concurrent.futures import ThreadPoolExecutor

    def job(rng):
        s, e = rng
        return worker(s, grid.block(s, e))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(job, ranges)


def split_point(z, sys):
    """Split a flat coordinate vector into (x, u, d) per the system dims."""
    z = np.asarray(z, dtype=float)
    n, q = sys.n, sys.q
    return z[:n], z[n:n + q], z[n + q:]


def split_block(Z, sys):
    n, q = sys.n, sys.q
    return Z[:, :n], Z[:, n:n + q], Z[:, n + q:]


def parse_grid(text):
    """Parse the grid file format: one ``<lo> <hi> <count>`` line per axis,
    in coordinate order x1..xn u1..uq d1..dm; '#' starts a comment."""
    lows, highs, counts = [], [], []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GridError(f"line {line_no}: expected '<lo> <hi> <count>', got {raw.strip()!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
            count = int(parts[2])
        except ValueError as exc:
            raise GridError(f"line {line_no}: {exc}") from None
        lows.append(lo)
        highs.append(hi)
        counts.append(count)
    if not lows:
        raise GridError("grid file declares no axes")
    return GridSpec(np.array(lows), np.array(highs), np.array(counts, dtype=np.int64))


def grid_to_text(grid):
    lines = [
        f"{float(lo)!r} {float(hi)!r} {int(c)}"
        for lo, hi, c in zip(grid.lows, grid.highs, grid.counts)
    ]
    return "\n".join(lines) + "\n"


def box_grid(bounds, counts):
    """Build a GridSpec from [(lo, hi), ...] and a per-axis count (int or list)."""
    lows = np.array([b[0] for b in bounds], dtype=float)
    highs = np.array([b[1] for b in bounds], dtype=float)
    if np.isscalar(counts):
        counts = np.full(len(bounds), int(counts), dtype=np.int64)
    else:
        counts = np.asarray(counts, dtype=np.int64)
    return GridSpec(lows, highs, counts)
