"""Quadrature grids, sampled fields, inner products and L^p norms.

Grids are tensor products of one-dimensional rules: radius x angle on the
disk, x x y on the square.  The angular rule is the uniform (trapezoidal)
rule, exact for trigonometric polynomials of degree below N_theta.  The
non-periodic directions use either Gauss-Legendre or a tanh-sinh rule.

The tanh-sinh rule is the default because the background field log(n0) has
logarithmic singularities on the boundary and its L^p norms up to p = 64 draw
their mass from a boundary layer of width about e^{-p}.  Tanh-sinh nodes reach
that layer (down to a distance of 1e-150) with double-exponential accuracy
for smooth integrands as well.  Each node stores its exact distance to the
boundary (`gap`), because the coordinate itself rounds to the boundary value
for the deepest nodes; singular profiles are evaluated from the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .basis import Geometry, eval_basis
from .errors import UsageError

MIN_GAP = 1e-150


def tanh_sinh(n, min_gap=MIN_GAP):
    """Tanh-sinh rule on [0, 1] with `n` nodes (odd n nests under n -> 2n - 1).

    Returns (nodes, complements 1 - nodes, weights); complements are computed
    directly so they keep full relative precision near 1.
    """
    if n < 3:
        raise UsageError("tanh-sinh rule needs at least 3 nodes")
    # x = (1 + tanh q) / 2 with q = (pi/2) sinh t; the gap 1/(1 + e^{2q})
    # reaches min_gap at q = log(1/min_gap) / 2.
    q_max = 0.5 * math.log(1.0 / min_gap)
    t_max = math.asinh(q_max / (0.5 * math.pi))
    t = np.linspace(-t_max, t_max, n)
    h = t[1] - t[0]
    q = 0.5 * math.pi * np.sinh(t)
    nodes = 1.0 / (1.0 + np.exp(-2.0 * q))
    comp = 1.0 / (1.0 + np.exp(2.0 * q))
    e = np.exp(-2.0 * np.abs(q))
    sech2 = 4.0 * e / (1.0 + e) ** 2
    weights = h * 0.25 * math.pi * np.cosh(t) * sech2
    return nodes, comp, weights


def gauss_legendre(n):
    """Gauss-Legendre rule on [0, 1]: (nodes, complements, weights)."""
    x, w = leggauss(n)
    return 0.5 * (1.0 + x), 0.5 * (1.0 - x), 0.5 * w


_RULES = {"tanh_sinh": tanh_sinh, "gauss": gauss_legendre}


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product quadrature grid over a disk or square.

    Nodes are ordered with the second coordinate (theta or y) varying fastest.
    `gap` holds the exact distance of every node to the boundary; `rho` is
    the normalized boundary factor 1 - r^2/R^2 on the disk and
    16 x (L-x) y (L-y) / L^4 on the square, built from the gaps.
    """

    geometry: Geometry
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    resolution: tuple
    rule: str
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self):
        return self.weights.size

    def basis_samples(self, basis, derivs=2):
        """Samples of every basis mode at the nodes (cached per basis).

        derivs=0 keeps values only; derivs>=1 adds gradients and Hessians.
        """
        full = 2 if derivs >= 1 else 0
        for key in ((id(basis), 2), (id(basis), full)):
            hit = self._cache.get(key)
            if hit is not None and hit[0] is basis:
                return hit[1]
        if basis.geometry != self.geometry:
            raise UsageError("basis and grid live on different geometries")
        samples = eval_basis(basis, self.points, check=False, derivs=full)
        self._cache[(id(basis), full)] = (basis, samples)
        return samples


def _default_resolution(geometry, basis, rule):
    if geometry.kind == "disk":
        m_max = max(md.m for md in basis)
        k_max = max(md.k for md in basis)
        n_theta = 4 * m_max + 16
        if rule == "gauss":
            n_r = 2 * k_max + 16
        else:
            root = max(md.root for md in basis)
            n_r = 2 * int(40 + 3 * root) + 1
        return n_r, n_theta
    K = max(max(md.m, md.k) for md in basis)
    if rule == "gauss":
        n = 2 * K + 16
    else:
        n = 2 * int(40 + 9 * K) + 1
    return n, n


def make_grid(geometry, basis_hint, rule="tanh_sinh", resolution=None, refine=0):
    """Quadrature grid adapted to the modes of `basis_hint`.

    `refine` halves the tanh-sinh step (or doubles the Gauss count) that many
    times; tanh-sinh refinements and doubled angular counts nest exactly.
    """
    if basis_hint is not None and len(basis_hint) == 0:
        raise UsageError("basis hint must be nonempty")
    if rule not in _RULES:
        raise UsageError(f"unknown quadrature rule {rule!r}")
    if resolution is None:
        resolution = _default_resolution(geometry, basis_hint, rule)
    n1, n2 = (int(v) for v in resolution)
    for _ in range(refine):
        n1 = 2 * n1 - 1 if rule == "tanh_sinh" else 2 * n1
        n2 = 2 * n2 if geometry.kind == "disk" else (2 * n2 - 1 if rule == "tanh_sinh" else 2 * n2)
    one_d = _RULES[rule]
    if geometry.kind == "disk":
        R = geometry.radius
        s, sc, ws = one_d(n1)
        r, gap, wr = R * s, R * sc, R * ws
        theta = 2.0 * math.pi * (np.arange(n2) + 0.5) / n2
        wt = 2.0 * math.pi / n2
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        points = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
        weights = np.repeat(wr * r * wt, n2)
        gaps = np.repeat(gap, n2)
        rho = gaps * (2.0 * R - gaps) / R ** 2
    else:
        L = geometry.side
        s, sc, ws = one_d(n1)
        x, xc, wx = L * s, L * sc, L * ws
        s, sc, ws = one_d(n2)
        y, yc, wy = L * s, L * sc, L * ws
        xx, yy = np.meshgrid(x, y, indexing="ij")
        points = np.stack([xx.ravel(), yy.ravel()], axis=1)
        weights = np.outer(wx, wy).ravel()
        gx = np.minimum(x, xc)
        gy = np.minimum(y, yc)
        gaps = np.minimum.outer(gx, gy).ravel()
        rho = (16.0 / L ** 4) * np.outer(x * xc, y * yc).ravel()
    for arr in (points, weights, gaps, rho):
        arr.setflags(write=False)
    if not (gaps > 0).all():
        raise UsageError("quadrature nodes must lie strictly inside the domain")
    return QuadratureGrid(geometry, points, weights, gaps, rho, (n1, n2), rule)


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: QuadratureGrid
    values: np.ndarray
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None

    def __post_init__(self):
        if self.values.shape != (self.grid.size,):
            raise UsageError("value count must equal the grid node count")


def constant_field(grid, value=1.0):
    return SampledField(grid, np.full(grid.size, float(value)))


def synthesize(grid, basis, coeffs, derivs=0):
    """Sample the field sum_i c_i e_i (optionally with gradient and Hessian)."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (basis.n,):
        raise UsageError("coefficient vector does not match the basis size")
    bs = grid.basis_samples(basis, derivs)
    values = c @ bs.value
    grad = hess = None
    if derivs >= 1:
        grad = np.einsum("i,ipa->pa", c, bs.gradient)
    if derivs >= 2:
        hess = np.einsum("i,ipab->pab", c, bs.hessian)
    return SampledField(grid, values, grad, hess)


def project(f, basis):
    """L^2 coefficients (f, e_i) of a sampled field."""
    bs = f.grid.basis_samples(basis, 0)
    return bs.value @ (f.grid.weights * f.values)


def _same_grid(f, g):
    if f.grid is not g.grid:
        raise UsageError("fields are sampled on different grids")


def integrate(f):
    return float(np.sum(f.grid.weights * f.values))


def inner(f, g):
    """L^2(D) inner product of two fields on the same grid."""
    _same_grid(f, g)
    return float(np.sum(f.grid.weights * f.values * g.values))


def lp_norm_values(values, weights, p):
    a = np.abs(values)
    if p == math.inf:
        return float(a.max()) if a.size else 0.0
    if p < 1:
        raise UsageError(f"L^p norm needs p >= 1, got {p}")
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    # scale by the max so large p neither overflows nor underflows
    return top * float(np.sum(weights * (a / top) ** p)) ** (1.0 / p)


def lp_norm(f, p):
    """L^p(D) norm; p = inf gives the node maximum of |f|."""
    return lp_norm_values(f.values, f.grid.weights, p)
