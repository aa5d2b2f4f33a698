"""Background density profiles and the regularized field g_delta.

g = log(n0) is sampled on a quadrature grid from the boundary factor rho
(1 - r^2/R^2 on the disk, 16 x(L-x) y(L-y)/L^4 on the square), so the
logarithmic singularity is evaluated exactly even at nodes whose coordinates
round onto the boundary.  Both regularizers are diagonal in the eigenbasis:

    (1 - delta Delta) g_delta = g          ->  gamma_i = (g, e_i) / (1 + delta mu_i)
    (1 - delta Delta) g_delta = T_{1/delta}(g)   (truncated variant, p < 2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, UsageError
from .quadrature import SampledField, lp_norm, project, synthesize

LOG_CLIP = 700.0
PROFILES = ("power_law", "gaussian", "constant")


@dataclass(frozen=True)
class DensitySpec:
    """n0 = profile + eta.

    power_law: rho^alpha (vanishes on the boundary, singular when eta = 0);
    gaussian: exp(-s^2 / sigma^2) with s the normalized distance to the center;
    constant: c.
    """

    profile: str = "power_law"
    alpha: float = 1.0
    sigma: float = 1.0
    c: float = 1.0
    eta: float = 0.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise DomainError(f"unknown density profile {self.profile!r}")
        if self.eta < 0:
            raise DomainError("density floor eta must be non-negative")
        if self.profile == "power_law" and not self.alpha > 0:
            raise DomainError("power-law exponent must be positive")
        if self.profile == "gaussian" and not self.sigma > 0:
            raise DomainError("gaussian width must be positive")
        if self.profile == "constant" and not self.c + self.eta > 0:
            raise DomainError("constant density must be positive")

    @property
    def singular(self):
        return self.profile == "power_law" and self.eta == 0


@dataclass(frozen=True, eq=False)
class DensityField:
    spec: DensitySpec
    g: SampledField
    gamma: np.ndarray
    delta: float
    basis: object
    truncation_k: float | None = None

    def g_delta(self, grid=None, derivs=0):
        """Sample g_delta = sum gamma_i e_i (on the density grid by default)."""
        return synthesize(grid or self.g.grid, self.basis, self.gamma, derivs)


def _center_distance(grid):
    geo = grid.geometry
    pts = grid.points
    if geo.kind == "disk":
        return np.hypot(pts[:, 0], pts[:, 1]) / geo.radius
    half = 0.5 * geo.side
    return np.hypot(pts[:, 0] - half, pts[:, 1] - half) / half


def sample_log_density(spec, grid):
    """g = log n0 at the grid nodes, clipped to |g| <= 700."""
    if spec.profile == "power_law":
        rho = grid.rho
        if spec.eta == 0:
            with np.errstate(divide="ignore"):
                g = spec.alpha * np.log(rho)
        else:
            g = np.log(rho ** spec.alpha + spec.eta)
    elif spec.profile == "gaussian":
        s = _center_distance(grid)
        if spec.eta == 0:
            g = -(s / spec.sigma) ** 2
        else:
            g = np.log(np.exp(-(s / spec.sigma) ** 2) + spec.eta)
    else:
        g = np.full(grid.size, math.log(spec.c + spec.eta))
    if np.isnan(g).any() or np.isinf(g).any():
        raise DomainError("n0 is not positive at some quadrature node")
    g = np.clip(g, -LOG_CLIP, LOG_CLIP)
    return SampledField(grid, g)


def _solve(g_values, grid, basis, delta):
    f = SampledField(grid, g_values)
    return project(f, basis) / (1.0 + delta * basis.mu)


def regularize_density(g, basis, delta, spec=None):
    """Spectral solve of h + delta (-Delta) h = g in the span of `basis`."""
    if not delta > 0:
        raise UsageError("regularization parameter delta must be positive")
    gamma = _solve(g.values, g.grid, basis, delta)
    return DensityField(spec or DensitySpec(), g, gamma, float(delta), basis)


def truncate_regularize(g, basis, delta, spec=None):
    """Clip g to [-1/delta, 1/delta], then apply the same elliptic solve."""
    if not delta > 0:
        raise UsageError("regularization parameter delta must be positive")
    k = 1.0 / delta
    gamma = _solve(np.clip(g.values, -k, k), g.grid, basis, delta)
    return DensityField(spec or DensitySpec(), g, gamma, float(delta), basis, k)


def build_density(spec, basis, grid, delta, truncate=False):
    """Sample log n0 and regularize it; delta = 0 projects without damping."""
    g = sample_log_density(spec, grid)
    if delta == 0:
        if spec.singular:
            raise UsageError("a singular density (eta = 0) needs delta > 0")
        return DensityField(spec, g, project(g, basis), 0.0, basis)
    reg = truncate_regularize if truncate else regularize_density
    return reg(g, basis, delta, spec)


def zero_density(basis, grid):
    """g = 0 (constant unit density)."""
    spec = DensitySpec("constant", c=1.0)
    return DensityField(spec, sample_log_density(spec, grid), np.zeros(basis.n), 0.0, basis)


def smooth_initial_field(phi0, eps):
    """Solve (I - Delta) u - eps Delta (u - Delta u) = (I - Delta) phi0 diagonally."""
    if eps < 0:
        raise UsageError("smoothing parameter must be non-negative")
    c = phi0.coeffs / (1.0 + eps * phi0.basis.mu)
    return replace(phi0, coeffs=c)


def contraction_report(density, p_list, grid=None):
    """||g_delta||_p and ||g||_p on a common grid for each p."""
    grid = grid or density.g.grid
    g = density.g if grid is density.g.grid else None
    gd = density.g_delta(grid)
    out = {}
    for p in p_list:
        out[p] = (lp_norm(gd, p), lp_norm(g, p) if g is not None else math.nan)
    return out
