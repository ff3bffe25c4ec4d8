"""Complex admittivity phantoms gamma = sigma + i*omega*eps on a volume grid.

Standing assumptions enforced here: Re gamma >= c > 0 and Im gamma >= 0
everywhere, gamma identically 1 on the shell |x| >= r_b (so the Schroedinger
and conductivity DtN maps coincide), and C^{1,1} regularity via a quintic
radial blend over each declared transition width.

The Schroedinger potential is q = lap(gamma^{1/2}) / gamma^{1/2} with the
principal square root (well defined since Re gamma > 0), computed with the
7-point stencil and forced to zero outside its admissible support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VolumeGrid

DEFAULT_RB = 0.85
# peak |S''| of the quintic smoothstep 6t^5-15t^4+10t^3 on [0,1]
_QUINTIC_D2_MAX = 10.0 / np.sqrt(3.0)


def smoothstep(t):
    """C^2 quintic blend: 0 for t<=0, 1 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@dataclass(frozen=True)
class PhantomSpec:
    """One of: constant, radial multilayer, off-center smoothed ball(s).

    kind "constant": value.
    kind "layers":   values[i] inside radii[i] (outermost value must be 1);
                     values[i] -> values[i+1] blended over [radii[i],
                     radii[i]+widths[i]].
    kind "balls":    gamma = 1 + sum (contrast-1)*bump(|x-center|/...) with
                     bump = 1 for d <= radius and a quintic fade to 0 over
                     [radius, radius+width].
    """

    kind: str
    value: complex = 1.0 + 0.0j
    values: tuple = ()
    radii: tuple = ()
    widths: tuple = ()
    balls: tuple = ()  # of (center(3), radius, width, contrast)
    r_b: float = DEFAULT_RB
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "layers", "balls"):
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        if self.kind == "layers":
            if not (len(self.values) == len(self.radii) + 1 == len(self.widths) + 1):
                raise ValueError("layers need len(values) = len(radii)+1 = len(widths)+1")
            if abs(complex(self.values[-1]) - 1.0) > 0:
                raise ValueError("outermost layer value must be exactly 1")
            if any(r <= 0 or w <= 0 for r, w in zip(self.radii, self.widths)):
                raise ValueError("radii and widths must be positive")
            if list(self.radii) != sorted(self.radii):
                raise ValueError("radii must increase")
        for v in self.contrast_values():
            v = complex(v)
            if v.real <= 0:
                raise ValueError(f"Re gamma must be positive, got {v}")
            if v.imag < 0:
                raise ValueError(f"Im gamma must be nonnegative, got {v}")
        if not 0.0 < self.r_b < 1.0:
            raise ValueError("boundary margin r_b must lie in (0, 1)")
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    def contrast_values(self):
        if self.kind == "constant":
            return (self.value,)
        if self.kind == "layers":
            return tuple(self.values)
        return tuple(b[3] for b in self.balls) + (1.0 + 0.0j,)

    def support_extent(self):
        """Radius beyond which gamma is identically 1."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "layers":
            return max(r + w for r, w in zip(self.radii, self.widths))
        if not self.balls:
            return 0.0
        return max(np.linalg.norm(np.asarray(b[0], dtype=float)) + b[1] + b[2]
                   for b in self.balls)

    @property
    def is_radial(self):
        if self.kind in ("constant", "layers"):
            return True
        return all(np.allclose(b[0], 0.0) for b in self.balls)

    def radial_profile(self):
        """gamma as a function of r in [0, 1]; only for radial specs."""
        if not self.is_radial:
            raise ValueError("phantom is not radially symmetric")

        def profile(r):
            r = np.asarray(r, dtype=float)
            return self._eval_radial(r)

        return profile

    def _eval_radial(self, r):
        if self.kind == "constant":
            return np.full(np.shape(r), complex(self.value))
        g = np.full(np.shape(r), complex(0))
        if self.kind == "layers":
            g[...] = complex(self.values[0])
            for inner, outer, rad, wid in zip(self.values[:-1], self.values[1:],
                                              self.radii, self.widths):
                s = smoothstep((r - rad) / wid)
                g = g + (complex(outer) - complex(inner)) * s
            return g
        g[...] = 1.0
        for center, rad, wid, contrast in self.balls:
            bump = 1.0 - smoothstep((r - rad) / wid)
            g = g + (complex(contrast) - 1.0) * bump
        return g

    def evaluate(self, pts):
        """gamma at arbitrary points, shape broadcast from pts[..., 3]."""
        pts = np.asarray(pts, dtype=float)
        if self.kind in ("constant", "layers"):
            return self._eval_radial(np.linalg.norm(pts, axis=-1))
        g = np.full(pts.shape[:-1], 1.0 + 0.0j)
        for center, rad, wid, contrast in self.balls:
            d = np.linalg.norm(pts - np.asarray(center, dtype=float), axis=-1)
            g += (complex(contrast) - 1.0) * (1.0 - smoothstep((d - rad) / wid))
        return g

    def declared_second_diff_bound(self):
        """A priori bound on |d^2 gamma / dx^2| from the blend construction."""
        bound = 0.0
        if self.kind == "layers":
            steps = [(abs(complex(o) - complex(i)), w)
                     for i, o, w in zip(self.values[:-1], self.values[1:], self.widths)]
        elif self.kind == "balls":
            steps = [(abs(complex(b[3]) - 1.0), b[2]) for b in self.balls]
        else:
            steps = []
        for dv, w in steps:
            bound += dv * (_QUINTIC_D2_MAX / w ** 2 + 4.0 / w ** 2)
        return 1.5 * bound + 1e-12


@dataclass(frozen=True)
class AdmittivityField:
    """Complex gamma sampled on a VolumeGrid, identically 1 for |x| >= r_b."""

    grid: VolumeGrid
    gamma: np.ndarray
    omega: float
    r_b: float
    c_min: float                     # verified lower bound of Re gamma
    second_diff_max: float = 0.0     # measured max |second difference|
    second_diff_bound: float = np.inf

    @property
    def is_unit(self):
        return bool(np.all(self.gamma == 1.0))

    def sqrt_gamma(self):
        """Principal square root; Re > 0 since Re gamma > 0."""
        return np.sqrt(self.gamma)


@dataclass(frozen=True)
class PotentialField:
    """Schroedinger potential q on the grid, zero outside the unit ball."""

    grid: VolumeGrid
    q: np.ndarray
    support_radius: float


def _second_diff_max(values, h):
    worst = 0.0
    for ax in range(3):
        v = np.moveaxis(values, ax, 0)
        d2 = np.abs(v[2:] - 2.0 * v[1:-1] + v[:-2]) / h ** 2
        worst = max(worst, float(d2.max()))
    return worst


def eval_phantom(spec, grid):
    """Sample a PhantomSpec on the grid, enforcing the standing assumptions.

    Raises if the inclusion (including its transition) overlaps the shell
    |x| >= r_b - 2h needed to keep the potential supported strictly inside
    r_b at this resolution, or if positivity fails anywhere on the grid.
    """
    margin = 2.0 * grid.h
    extent = spec.support_extent()
    if extent > spec.r_b - margin:
        raise ValueError(
            f"inclusion extent {extent:.4f} overlaps the shell: needs "
            f"<= r_b - 2h = {spec.r_b - margin:.4f} at n={grid.n}"
        )
    gamma = spec.evaluate(grid.points()).astype(np.complex128)
    c_min = float(gamma.real.min())
    if c_min <= 0:
        raise ValueError(f"Re gamma must stay positive; min {c_min}")
    if float(gamma.imag.min()) < -1e-14:
        raise ValueError("Im gamma must stay nonnegative")
    d2 = _second_diff_max(gamma, grid.h)
    bound = spec.declared_second_diff_bound()
    return AdmittivityField(grid=grid, gamma=gamma, omega=spec.omega,
                            r_b=spec.r_b, c_min=c_min,
                            second_diff_max=d2, second_diff_bound=bound)


def make_exponential_field(grid, alpha):
    """Test-only field gamma = exp(2 alpha . x); ignores the shell constraint."""
    pts = grid.points()
    gamma = np.exp(2.0 * np.tensordot(pts, np.asarray(alpha, dtype=float), axes=(-1, 0)))
    return AdmittivityField(grid=grid, gamma=gamma.astype(np.complex128),
                            omega=1.0, r_b=1.0, c_min=float(gamma.real.min()),
                            second_diff_max=_second_diff_max(gamma, grid.h),
                            second_diff_bound=np.inf)


def laplacian_7pt(values, h):
    """7-point Laplacian on the interior, zero on the outermost layer."""
    out = np.zeros_like(values)
    v = values
    out[1:-1, 1:-1, 1:-1] = (
        v[2:, 1:-1, 1:-1] + v[:-2, 1:-1, 1:-1]
        + v[1:-1, 2:, 1:-1] + v[1:-1, :-2, 1:-1]
        + v[1:-1, 1:-1, 2:] + v[1:-1, 1:-1, :-2]
        - 6.0 * v[1:-1, 1:-1, 1:-1]
    ) / h ** 2
    return out


def schrodinger_potential(field, enforce_support=True):
    """q = lap(gamma^{1/2}) / gamma^{1/2} on the field's grid.

    With gamma = 1 on a shell wider than one stencil inside r_b, every node
    at |x| >= r_b sees gamma = 1 on its whole stencil, so q vanishes there;
    the mask makes that exact in floating point as well.
    """
    w = field.sqrt_gamma()
    q = laplacian_7pt(w, field.grid.h) / w
    if enforce_support:
        r = field.grid.radii()
        q = np.where(r >= field.r_b, 0.0, q)
        support = field.r_b
    else:
        support = 1.0
    return PotentialField(grid=field.grid, q=q.astype(np.complex128),
                          support_radius=support)


def two_layer_phantom(inner=1.5 + 0.5j, radius=0.4, width=0.1, r_b=DEFAULT_RB):
    """The standard complex two-layer radial phantom."""
    return PhantomSpec(kind="layers", values=(complex(inner), 1.0 + 0.0j),
                       radii=(radius,), widths=(width,), r_b=r_b)


def small_contrast_phantom(re_amp=0.05, im_amp=0.02, radius=0.3, width=0.25,
                           r_b=DEFAULT_RB):
    """gamma = 1 + (re_amp + i im_amp) * bump, bump centered at the origin."""
    contrast = 1.0 + re_amp + 1j * im_amp
    return PhantomSpec(kind="balls",
                       balls=(((0.0, 0.0, 0.0), radius, width, contrast),),
                       r_b=r_b)
