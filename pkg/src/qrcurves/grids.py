"""Axis-aligned sample grids with midpoint-rule quadrature.

A GridDomain is a box with a per-axis resolution; quadrature points are
cell centers and every cell carries the same weight (the cell volume).
Balls and annuli are realized as boxes with a membership mask tested at
cell centers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class BallMask:
    center: tuple
    radius: float

    def contains(self, X: np.ndarray) -> np.ndarray:
        d = X - np.asarray(self.center)
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2

    def canonical(self):
        return {"kind": "ball", "center": list(self.center),
                "radius": self.radius}


@dataclass(frozen=True)
class AnnulusMask:
    center: tuple
    inner: float
    outer: float

    def contains(self, X: np.ndarray) -> np.ndarray:
        d = X - np.asarray(self.center)
        r2 = np.einsum("ij,ij->i", d, d)
        return (r2 >= self.inner ** 2) & (r2 <= self.outer ** 2)

    def canonical(self):
        return {"kind": "annulus", "center": list(self.center),
                "inner": self.inner, "outer": self.outer}


@dataclass(frozen=True)
class GridDomain:
    box: tuple
    resolution: tuple
    mask: Optional[object] = None

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        res = tuple(int(r) for r in self.resolution)
        if len(box) != len(res):
            raise DimensionError("box and resolution ranks differ")
        if any(lo >= hi for lo, hi in box):
            raise DimensionError("box needs lo < hi on every axis")
        if any(r < 2 for r in res):
            raise DimensionError("resolution must be at least 2 per axis")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "resolution", res)

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def cell_volume(self) -> float:
        return math.prod((hi - lo) / r
                         for (lo, hi), r in zip(self.box, self.resolution))

    def axes(self) -> list:
        return [lo + (np.arange(r) + 0.5) * (hi - lo) / r
                for (lo, hi), r in zip(self.box, self.resolution)]

    def points(self) -> np.ndarray:
        """Masked cell centers, shape (N, dim), row-major axis order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        X = np.stack([g.reshape(-1) for g in mesh], axis=1)
        if self.mask is not None:
            X = X[self.mask.contains(X)]
        return X

    @property
    def measure(self) -> float:
        return self.points().shape[0] * self.cell_volume

    def with_resolution(self, resolution) -> "GridDomain":
        if isinstance(resolution, int):
            resolution = (resolution,) * self.dim
        return GridDomain(self.box, tuple(resolution), self.mask)

    def refined(self, factor: int = 2) -> "GridDomain":
        return self.with_resolution(tuple(r * factor for r in self.resolution))

    def coarsened(self, factor: int = 2) -> "GridDomain":
        return self.with_resolution(tuple(max(2, r // factor)
                                          for r in self.resolution))

    def contains(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ok = np.ones(X.shape[0], dtype=bool)
        for a, (lo, hi) in enumerate(self.box):
            ok &= (X[:, a] >= lo) & (X[:, a] <= hi)
        if self.mask is not None:
            ok &= self.mask.contains(X)
        return ok

    def boundary_points(self, per_axis: int = 64) -> np.ndarray:
        """Samples of the region boundary (box faces, or mask spheres)."""
        if isinstance(self.mask, BallMask):
            return sphere_points(self.mask.center, self.mask.radius, per_axis)
        if isinstance(self.mask, AnnulusMask):
            return np.vstack([
                sphere_points(self.mask.center, self.mask.inner, per_axis),
                sphere_points(self.mask.center, self.mask.outer, per_axis)])
        pts = []
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.box]
        for a in range(self.dim):
            others = axes[:a] + axes[a + 1:]
            face = np.meshgrid(*others, indexing="ij") if others else []
            flat = [g.reshape(-1) for g in face]
            count = flat[0].shape[0] if flat else 1
            for val in self.box[a]:
                row = np.empty((count, self.dim))
                row[:, a] = val
                cols = [c for c in range(self.dim) if c != a]
                for c, g in zip(cols, flat):
                    row[:, c] = g
                pts.append(row)
        return np.vstack(pts)

    def canonical(self) -> dict:
        return {
            "box": [list(b) for b in self.box],
            "resolution": list(self.resolution),
            "mask": self.mask.canonical() if self.mask is not None else None,
        }

    def hash_hex(self) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def sphere_points(center, radius: float, count: int,
                  seed: int = 1234) -> np.ndarray:
    """Deterministic points on a sphere; exact circle for dimension 2."""
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    if n == 1:
        d = np.array([[-1.0], [1.0]])
    elif n == 2:
        t = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        d = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((count * n, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
    return center + radius * d


def ball_points(center, radius: float, count: int = 256,
                seed: int = 1234) -> np.ndarray:
    """Deterministic sample of a closed ball: interior draws plus boundary."""
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    inner = center + d * r[:, None]
    axes = np.vstack([np.eye(n), -np.eye(n)]) * radius + center
    return np.vstack([inner, sphere_points(center, radius, max(32, count // 4),
                                           seed=seed + 1), axes,
                      center[None, :]])
