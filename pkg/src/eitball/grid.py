"""Regular Cartesian grid over a box containing the closed unit ball."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_N = 16


@dataclass(frozen=True)
class VolumeGrid:
    """n samples per axis over [-(1+pad), 1+pad]^3; h*(n-1) spans the box."""

    n: int
    pad: float = 0.1

    def __post_init__(self):
        if self.n < MIN_N:
            raise ValueError(f"grid needs n >= {MIN_N}, got {self.n}")
        if self.pad <= 0:
            raise ValueError("pad must be positive so the closed ball is interior")

    @property
    def half(self):
        return 1.0 + self.pad

    @property
    def h(self):
        return 2.0 * self.half / (self.n - 1)

    @property
    def coords(self):
        return -self.half + self.h * np.arange(self.n)

    def points(self):
        """(n, n, n, 3) array of node coordinates, x fastest in memory layout
        points[i, j, k] = (x_i, y_j, z_k)."""
        c = self.coords
        x, y, z = np.meshgrid(c, c, c, indexing="ij")
        return np.stack([x, y, z], axis=-1)

    def radii(self):
        c2 = self.coords ** 2
        return np.sqrt(c2[:, None, None] + c2[None, :, None] + c2[None, None, :])

    def ball_mask(self, radius=1.0):
        return self.radii() < radius

    def cell_volume(self):
        return self.h ** 3

    def key(self):
        """Hashable identity used for kernel cache files."""
        return (self.n, round(self.pad, 12))

    def difference_coords(self):
        """Coordinates k*h, k in [-n, n-1], of the doubled difference lattice
        (where convolution kernels live)."""
        return self.h * np.arange(-self.n, self.n)
