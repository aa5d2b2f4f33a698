"""Dirichlet Laplacian eigenbases on the disk and the square.

On both domains the eigenfunctions of -Delta with e = 0 on the boundary also
satisfy Delta e = 0 there, so they solve the mixed fourth-order eigenproblem
with eigenvalue lam = 2 + mu and every linear operator of the Galerkin system
becomes diagonal.

Disk modes (radius R, polar coordinates r, theta):

    e = N J_m(j_{m,k} r / R) cos(m theta)   or   ... sin(m theta),
    mu = (j_{m,k} / R)^2,
    N = 1 / (sqrt(pi) R |J_{m+1}(j_{m,k})|), times sqrt(2) for m >= 1.

Square modes on [0, L]^2:

    e = (2 / L) sin(k pi x / L) sin(l pi y / L),   mu = pi^2 (k^2 + l^2) / L^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bessel import MAX_ORDER, MAX_ZERO_INDEX, bessel_j, bessel_j_orders, bessel_zeros
from .errors import DomainError, RangeError

# Below this value of kappa * r the disk modes are evaluated from the
# Cartesian power series; the polar chain rule loses accuracy near r = 0.
_CENTER_SERIES = 1e-2
_SERIES_TERMS = 4


@dataclass(frozen=True)
class Geometry:
    kind: str = "disk"
    radius: float = 1.0
    side: float = 1.0

    def __post_init__(self):
        if self.kind not in ("disk", "square"):
            raise DomainError(f"unknown geometry kind {self.kind!r}")
        if not self.radius > 0 or not self.side > 0:
            raise DomainError("radius and side must be positive")

    @classmethod
    def disk(cls, radius=1.0):
        return cls("disk", radius=float(radius))

    @classmethod
    def square(cls, side=1.0):
        return cls("square", side=float(side))

    @property
    def area(self):
        if self.kind == "disk":
            return math.pi * self.radius ** 2
        return self.side ** 2

    def contains(self, points):
        """Boolean mask of points lying strictly inside the domain."""
        pts = _as_points(points)
        x, y = pts[:, 0], pts[:, 1]
        if self.kind == "disk":
            return np.hypot(x, y) < self.radius
        L = self.side
        return (x > 0) & (x < L) & (y > 0) & (y < L)

    def describe(self):
        if self.kind == "disk":
            return {"kind": "disk", "radius": self.radius}
        return {"kind": "square", "side": self.side}


@dataclass(frozen=True)
class BasisMode:
    """One eigenfunction.

    For the disk `m` is the angular index, `k` the radial index and `parity`
    is "cos" or "sin".  For the square (m, k) are the wavenumbers (k, l) along
    x and y and `parity` is empty.
    """

    kind: str
    m: int
    k: int
    parity: str
    mu: float
    lam: float
    norm_const: float
    scale: float
    root: float = 0.0

    @property
    def kappa(self):
        """Radial wavenumber sqrt(mu)."""
        return math.sqrt(self.mu)

    def label(self):
        if self.kind == "disk":
            return f"m={self.m},k={self.k},{self.parity}"
        return f"k={self.m},l={self.k}"


@dataclass(frozen=True)
class BasisSet:
    geometry: Geometry
    modes: tuple
    mu: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)

    @property
    def n(self):
        return len(self.modes)

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    def table(self):
        """Rows (index, m_or_k, k_or_l, parity, mu, lambda, norm_const)."""
        return [(i, md.m, md.k, md.parity, md.mu, md.lam, md.norm_const)
                for i, md in enumerate(self.modes)]

    def checksum_bytes(self):
        parts = [repr(self.geometry.describe()).encode()]
        for md in self.modes:
            parts.append(f"{md.m},{md.k},{md.parity};".encode())
        parts.append(np.ascontiguousarray(self.mu, dtype="<f8").tobytes())
        return b"".join(parts)


@dataclass(frozen=True)
class ModeSamples:
    """Pointwise samples of one mode (or of a field, when stacked)."""

    value: np.ndarray
    gradient: np.ndarray
    perp_gradient: np.ndarray
    laplacian: np.ndarray
    hessian: np.ndarray


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("points must have shape (P, 2)")
    return pts


def _disk_mode(m, k, parity, R):
    root = float(bessel_zeros(m, k)[k - 1])
    jm1 = abs(float(bessel_j(m + 1, root)))
    norm = 1.0 / (math.sqrt(math.pi) * R * jm1)
    if m >= 1:
        norm *= math.sqrt(2.0)
    mu = (root / R) ** 2
    return BasisMode("disk", m, k, parity, mu, 2.0 + mu, norm, R, root)


def _square_mode(k, l, L):
    mu = math.pi ** 2 * (k * k + l * l) / L ** 2
    return BasisMode("square", k, l, "", mu, 2.0 + mu, 2.0 / L, L)


def _disk_modes(geometry, n):
    R = geometry.radius
    # Weyl's law on the unit disk: about j^2 / 4 modes below the zero j
    cutoff = 2.4 * math.sqrt(n) + 6.0
    while True:
        if cutoff > MAX_ORDER + 1:
            # orders above the table would start contributing (j_{m,1} > m)
            raise RangeError(f"n={n} needs angular indices beyond {MAX_ORDER}")
        # j_{m,k} >= j_{0,k} > (k - 1/4) pi, so `count` zeros reach past the cutoff
        count = int(cutoff / math.pi) + 2
        if count > MAX_ZERO_INDEX:
            raise RangeError(f"n={n} needs radial indices beyond {MAX_ZERO_INDEX}")
        cands = []
        for m in range(min(MAX_ORDER, int(cutoff)) + 1):
            for k, z in enumerate(bessel_zeros(m, count), start=1):
                if z > cutoff:
                    break
                cands.append((z, m, k, "cos"))
                if m >= 1:
                    cands.append((z, m, k, "sin"))
        if len(cands) >= n:
            break
        cutoff *= 1.25
    cands.sort(key=lambda c: (c[0], c[1], c[2], c[3]))
    return [_disk_mode(m, k, par, R) for _, m, k, par in cands[:n]]


def _square_modes(geometry, n):
    K = 1
    while True:
        # every pair with k^2 + l^2 <= K^2 is present in the K x K block
        pairs = [(k * k + l * l, k, l) for k in range(1, K + 1) for l in range(1, K + 1)
                 if k * k + l * l <= K * K]
        if len(pairs) >= n:
            break
        K *= 2
    pairs.sort()
    return [_square_mode(k, l, geometry.side) for _, k, l in pairs[:n]]


def build_basis(geometry, n):
    """The first `n` eigenmodes in canonical order (mu ascending, ties by (m, k, parity))."""
    if n < 1:
        raise RangeError("basis size must be at least 1")
    if geometry.kind == "disk":
        modes = _disk_modes(geometry, n)
    else:
        modes = _square_modes(geometry, n)
    mu = np.array([md.mu for md in modes])
    lam = mu + 2.0
    mu.setflags(write=False)
    lam.setflags(write=False)
    return BasisSet(geometry, tuple(modes), mu, lam)


# -- evaluation ---------------------------------------------------------------

def _check_inside(geometry, pts):
    if not geometry.contains(pts).all():
        raise DomainError("evaluation points must lie strictly inside the domain")


def _pow(z, p):
    if p < 0:
        return np.zeros_like(z)
    return z ** p


def _disk_center(mode, x, y):
    """Power series of N J_m(kappa r) e^{i m theta} around the origin."""
    m = mode.m
    kap = mode.kappa
    z = x + 1j * y
    rho = x * x + y * y
    f = np.zeros_like(z)
    fx = np.zeros_like(z)
    fy = np.zeros_like(z)
    fxx = np.zeros_like(z)
    fxy = np.zeros_like(z)
    fyy = np.zeros_like(z)
    v = _pow(z, m)
    vx = m * _pow(z, m - 1)
    vy = 1j * vx
    vxx = m * (m - 1) * _pow(z, m - 2)
    vxy = 1j * vxx
    vyy = -vxx
    for s in range(_SERIES_TERMS):
        c = (-1) ** s * (0.5 * kap) ** (m + 2 * s) / (math.factorial(s) * math.factorial(m + s))
        u = rho ** s
        us1 = rho ** (s - 1) if s >= 1 else np.zeros_like(rho)
        us2 = rho ** (s - 2) if s >= 2 else np.zeros_like(rho)
        ux = 2 * s * x * us1
        uy = 2 * s * y * us1
        uxx = 2 * s * us1 + 4 * s * (s - 1) * x * x * us2
        uyy = 2 * s * us1 + 4 * s * (s - 1) * y * y * us2
        uxy = 4 * s * (s - 1) * x * y * us2
        f += c * u * v
        fx += c * (ux * v + u * vx)
        fy += c * (uy * v + u * vy)
        fxx += c * (uxx * v + 2 * ux * vx + u * vxx)
        fyy += c * (uyy * v + 2 * uy * vy + u * vyy)
        fxy += c * (uxy * v + ux * vy + uy * vx + u * vxy)
    take = np.real if mode.parity == "cos" else np.imag
    N = mode.norm_const
    return (N * take(f), N * take(fx), N * take(fy),
            N * take(fxx), N * take(fxy), N * take(fyy))


def _disk_polar(mode, x, y):
    m = mode.m
    kap = mode.kappa
    N = mode.norm_const
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    s = kap * r
    jprev, jm = bessel_j_orders([m - 1, m], s)
    d1 = jprev - (m / s) * jm
    d2 = -d1 / s - (1.0 - (m * m) / (s * s)) * jm
    A = N * jm
    Ar = N * kap * d1
    Arr = N * kap * kap * d2
    if mode.parity == "cos":
        T, Tp = np.cos(m * th), -m * np.sin(m * th)
    else:
        T, Tp = np.sin(m * th), m * np.cos(m * th)
    f = A * T
    fr = Ar * T
    ft = A * Tp
    frr = Arr * T
    frt = Ar * Tp
    ftt = -(m * m) * f
    c, sn = np.cos(th), np.sin(th)
    fx = c * fr - sn * ft / r
    fy = sn * fr + c * ft / r
    a = fr / r + ftt / (r * r)
    b = frt / r - ft / (r * r)
    fxx = c * c * frr + sn * sn * a - 2 * sn * c * b
    fyy = sn * sn * frr + c * c * a + 2 * sn * c * b
    fxy = sn * c * (frr - a) + (c * c - sn * sn) * b
    return f, fx, fy, fxx, fxy, fyy


def _disk_parts(mode, x, y):
    out = [np.empty_like(x) for _ in range(6)]
    near = mode.kappa * np.hypot(x, y) < _CENTER_SERIES
    for mask, fn in ((near, _disk_center), (~near, _disk_polar)):
        if mask.any():
            for dst, src in zip(out, fn(mode, x[mask], y[mask])):
                dst[mask] = src
    return out


def _square_parts(mode, x, y):
    L = mode.scale
    a = math.pi * mode.m / L
    b = math.pi * mode.k / L
    N = mode.norm_const
    sx, cx = np.sin(a * x), np.cos(a * x)
    sy, cy = np.sin(b * y), np.cos(b * y)
    f = N * sx * sy
    return (f, N * a * cx * sy, N * b * sx * cy,
            -a * a * f, N * a * b * cx * cy, -b * b * f)


def _parts(mode, pts):
    x, y = pts[:, 0], pts[:, 1]
    if mode.kind == "disk":
        return _disk_parts(mode, x, y)
    return _square_parts(mode, x, y)


def _pack(mode, parts):
    f, fx, fy, fxx, fxy, fyy = parts
    grad = np.stack([fx, fy], axis=-1)
    perp = np.stack([-fy, fx], axis=-1)
    hess = np.stack([np.stack([fxx, fxy], axis=-1), np.stack([fxy, fyy], axis=-1)], axis=-2)
    return ModeSamples(f, grad, perp, -mode.mu * f, hess)


def eval_mode(mode, points, geometry=None):
    """Value, gradient, perpendicular gradient, Laplacian and Hessian at `points`.

    The Laplacian is -mu times the value by construction.  `geometry` defaults
    to the unit-scaled domain implied by the mode.
    """
    pts = _as_points(points)
    if geometry is None:
        geometry = (Geometry.disk(mode.scale) if mode.kind == "disk"
                    else Geometry.square(mode.scale))
    _check_inside(geometry, pts)
    return _pack(mode, _parts(mode, pts))


def eval_basis(basis, points, check=True, derivs=2):
    """Stacked samples of every mode: arrays of shape (n, P, ...).

    With derivs=0 only values and Laplacians are kept (gradient, perpendicular
    gradient and Hessian are None), which keeps large bases affordable.
    """
    pts = _as_points(points)
    if check:
        _check_inside(basis.geometry, pts)
    n, P = basis.n, pts.shape[0]
    keep = 6 if derivs >= 1 else 1
    parts = np.empty((keep, n, P))
    for i, mode in enumerate(basis.modes):
        parts[:, i] = _parts(mode, pts)[:keep]
    f = parts[0]
    lap = -basis.mu[:, None] * f
    if keep == 1:
        return ModeSamples(f, None, None, lap, None)
    _, fx, fy, fxx, fxy, fyy = parts
    grad = np.stack([fx, fy], axis=-1)
    perp = np.stack([-fy, fx], axis=-1)
    hess = np.stack([np.stack([fxx, fxy], axis=-1), np.stack([fxy, fyy], axis=-1)], axis=-2)
    return ModeSamples(f, grad, perp, lap, hess)
