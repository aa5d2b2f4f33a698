"""Galerkin coupling tensors.

The triad tensor T_ijl = int e_i grad_perp(e_j) . grad(e_l) carries both the
advection by the background field and the quadratic nonlinearity; with
g_delta = sum gamma_l e_l the Galerkin system reads

    (1 + mu_i) dc_i/dt = - sum_jl T_ijl c_j (gamma_l + mu_l c_l)
                         - eps mu_i (1 + mu_i) c_i - eps mu_i gamma_i.

T is antisymmetric in (j, l) and in (i, l), so the quadratic form
sum_i c_i (...) vanishes identically.

All modes are separable, e = A(s) S(t) with (s, t) = (r, theta) on the disk
and (x, y) on the square, and grad_perp f . grad h = (f_s h_t - f_t h_s) / J
with J = r on the disk (J = 1 on the square).  The area element cancels J, so

    T_ijl = <A_i A_j' A_l> (S_i S_j S_l') - <A_i A_j A_l'> (S_i S_j' S_l).

The angular factors on the disk are integrated in closed form; the
remaining one-dimensional integrals of smooth functions use Gauss-Legendre
rules with enough nodes for triple products.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bessel import bessel_j_orders
from .errors import UsageError

PRUNE = 1e-14
SPOT_TOL = 1e-13
_MAGIC = b"HMT1"
_RECORD = np.dtype([("i", "<u4"), ("j", "<u4"), ("l", "<u4"), ("v", "<f8")])


@dataclass(frozen=True, eq=False)
class CouplingTensors:
    basis: object
    i: np.ndarray = field(repr=False)
    j: np.ndarray = field(repr=False)
    l: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)
    mass_diag: np.ndarray = field(repr=False)
    stiff_diag: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    eps: float = 0.0
    candidates: int = 0
    spot_checked: int = 0
    spot_max: float = 0.0

    @property
    def n(self):
        return self.basis.n

    @property
    def count(self):
        return self.value.size

    def dense(self):
        """Dense n x n x n copy of T (small bases only)."""
        n = self.n
        out = np.zeros((n, n, n))
        out[self.i, self.j, self.l] = self.value
        return out

    def advection_matrix(self):
        """B^g_ij = sum_l gamma_l T_ijl."""
        n = self.n
        out = np.zeros((n, n))
        np.add.at(out, (self.i, self.j), self.value * self.gamma[self.l])
        return out

    def nonlinear(self, c):
        """sum_jl T_ijl c_j (gamma_l + mu_l c_l)."""
        w = self.value * c[self.j] * (self.gamma[self.l] + self.stiff_diag[self.l] * c[self.l])
        return np.bincount(self.i, weights=w, minlength=self.n)

    def to_bytes(self):
        rec = np.empty(self.count, dtype=_RECORD)
        rec["i"], rec["j"], rec["l"], rec["v"] = self.i, self.j, self.l, self.value
        return _MAGIC + struct.pack("<IQ", self.n, self.count) + rec.tobytes()

    def checksum(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def dump(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())


def load_triads(path, basis):
    """Read an HMT1 dump back into triad-only tensors for `basis`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise UsageError(f"{path}: not an HMT1 tensor file")
    n, count = struct.unpack_from("<IQ", raw, 4)
    if n != basis.n:
        raise UsageError(f"{path}: tensor built for n={n}, basis has n={basis.n}")
    rec = np.frombuffer(raw, dtype=_RECORD, count=count, offset=16)
    return _make(basis, rec["i"].astype(np.int64), rec["j"].astype(np.int64),
                 rec["l"].astype(np.int64), rec["v"].astype(float), count)


def _make(basis, i, j, l, v, candidates, spot_checked=0, spot_max=0.0):
    mu = np.asarray(basis.mu, dtype=float)
    return CouplingTensors(basis, i, j, l, v, 1.0 + mu, mu.copy(), np.zeros(basis.n), 0.0,
                           candidates, spot_checked, spot_max)


# -- selection rules ----------------------------------------------------------

def _candidates(basis):
    """Index triples (i, j, l), lexicographic, that can carry a nonzero T."""
    n = basis.n
    modes = basis.modes
    out = []
    if basis.geometry.kind == "disk":
        m = np.array([md.m for md in modes])
        odd = np.array([md.parity == "sin" for md in modes])
        jj, ll = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        jj, ll = jj.ravel(), ll.ravel()
        ok = (jj != ll) & ((m[jj] > 0) | (m[ll] > 0))
        jj, ll = jj[ok], ll[ok]
        for i in range(n):
            hit = ((m[jj] + m[ll] == m[i]) | (np.abs(m[jj] - m[ll]) == m[i]))
            hit &= (odd[i].astype(int) + odd[jj] + odd[ll]) % 2 == 1
            sel = np.flatnonzero(hit)
            out.append(np.stack([np.full(sel.size, i), jj[sel], ll[sel]], axis=1))
    else:
        a = np.array([md.m for md in modes])
        b = np.array([md.k for md in modes])
        jj, ll = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        jj, ll = jj.ravel(), ll.ravel()
        ok = jj != ll
        jj, ll = jj[ok], ll[ok]
        for i in range(n):
            hit = (a[jj] + a[ll] == a[i]) | (np.abs(a[jj] - a[ll]) == a[i])
            hit &= (b[jj] + b[ll] == b[i]) | (np.abs(b[jj] - b[ll]) == b[i])
            sel = np.flatnonzero(hit)
            out.append(np.stack([np.full(sel.size, i), jj[sel], ll[sel]], axis=1))
    idx = np.concatenate(out) if out else np.zeros((0, 3), dtype=np.int64)
    return idx.astype(np.int64)


# -- one-dimensional factors --------------------------------------------------

def _trig_triple(kinds, freqs):
    """int_0^{2pi} f1 f2 f3 dtheta for fi = cos(ai t) ('c') or sin(ai t) ('s')."""
    total = 0j
    for signs in itertools.product((1, -1), repeat=3):
        if sum(s * a for s, a in zip(signs, freqs)) != 0:
            continue
        coef = 1 + 0j
        for s, kind in zip(signs, kinds):
            coef *= 0.5 if kind == "c" else (s * 0.5 / 1j)
        total += coef
    return 2.0 * math.pi * total.real


def _angular_factor(modes, tri, deriv):
    """int S_i S_j S_l with the derivative on position `deriv` (1 = j, 2 = l)."""
    out = np.empty(len(tri))
    cache = {}
    for row, t in enumerate(tri):
        kinds, freqs, scale = [], [], 1.0
        for pos, idx in enumerate(t):
            md = modes[idx]
            kind = "s" if md.parity == "sin" else "c"
            if pos == deriv:
                # d/dt cos(mt) = -m sin(mt), d/dt sin(mt) = m cos(mt)
                scale *= -md.m if kind == "c" else md.m
                kind = "c" if kind == "s" else "s"
            kinds.append(kind)
            freqs.append(md.m)
        key = (tuple(kinds), tuple(freqs))
        if key not in cache:
            cache[key] = _trig_triple(*key)
        out[row] = scale * cache[key]
    return out


def _disk_radial(basis, n_nodes):
    """Radial profiles A and A' of every mode on a Gauss-Legendre rule."""
    R = basis.geometry.radius
    x, w = leggauss(n_nodes)
    r = 0.5 * R * (1.0 + x)
    w = 0.5 * R * w
    A = np.empty((basis.n, n_nodes))
    dA = np.empty((basis.n, n_nodes))
    for idx, md in enumerate(basis.modes):
        s = md.kappa * r
        jprev, jm = bessel_j_orders([md.m - 1, md.m], s)
        A[idx] = md.norm_const * jm
        dA[idx] = md.norm_const * md.kappa * (jprev - (md.m / s) * jm)
    return w, A, dA


def _square_axis(wavenumbers, L, n_nodes):
    x, w = leggauss(n_nodes)
    x = 0.5 * L * (1.0 + x)
    w = 0.5 * L * w
    k = np.asarray(wavenumbers, dtype=float)[:, None] * math.pi / L
    return w, np.sin(k * x), k * np.cos(k * x)


def _triple_sum(w, F, G, H, tri, chunk=200_000):
    out = np.empty(len(tri))
    for s in range(0, len(tri), chunk):
        t = tri[s:s + chunk]
        out[s:s + chunk] = np.einsum("q,tq,tq,tq->t", w, F[t[:, 0]], G[t[:, 1]], H[t[:, 2]])
    return out


def _triad_values(basis, tri):
    geo = basis.geometry
    if len(tri) == 0:
        return np.zeros(0)
    if geo.kind == "disk":
        root = max(md.root for md in basis.modes)
        w, A, dA = _disk_radial(basis, int(1.5 * root) + 48)
        rad_j = _triple_sum(w, A, dA, A, tri)
        rad_l = _triple_sum(w, A, A, dA, tri)
        return (rad_j * _angular_factor(basis.modes, tri, 2)
                - rad_l * _angular_factor(basis.modes, tri, 1))
    L = geo.side
    a = [md.m for md in basis.modes]
    b = [md.k for md in basis.modes]
    nodes = int(1.5 * (max(a) + max(b))) + 48
    wx, Sx, dSx = _square_axis(a, L, nodes)
    wy, Sy, dSy = _square_axis(b, L, nodes)
    amp = (2.0 / L) ** 3
    # grad_perp e_j . grad e_l = d_x e_j d_y e_l - d_y e_j d_x e_l
    t1 = _triple_sum(wx, Sx, dSx, Sx, tri) * _triple_sum(wy, Sy, Sy, dSy, tri)
    t2 = _triple_sum(wx, Sx, Sx, dSx, tri) * _triple_sum(wy, Sy, dSy, Sy, tri)
    return amp * (t1 - t2)


def quadrature_triads(grid, basis, tri):
    """T_ijl by direct 2-D quadrature on `grid` (independent route)."""
    bs = grid.basis_samples(basis)
    w = grid.weights
    out = np.empty(len(tri))
    for row, (i, j, l) in enumerate(tri):
        dot = np.einsum("pa,pa->p", bs.perp_gradient[j], bs.gradient[l])
        out[row] = np.sum(w * bs.value[i] * dot)
    return out


def _rejected_sample(basis, kept, fraction, rng):
    n = basis.n
    total = n ** 3
    want = int(math.ceil(fraction * max(total - len(kept), 0)))
    if want == 0:
        return np.zeros((0, 3), dtype=np.int64)
    flat_kept = np.sort(kept[:, 0] * n * n + kept[:, 1] * n + kept[:, 2])
    picks = rng.choice(total, size=min(total, 2 * want + 16), replace=False)
    pos = np.searchsorted(flat_kept, picks)
    pos = np.minimum(pos, max(len(flat_kept) - 1, 0))
    is_kept = flat_kept[pos] == picks if len(flat_kept) else np.zeros(picks.size, bool)
    picks = np.sort(picks[~is_kept][:want])
    return np.stack([picks // (n * n), (picks // n) % n, picks % n], axis=1)


def assemble_triads(basis, grid=None, spot_fraction=0.0, seed=0):
    """Triad tensor over the triples allowed by the selection rules.

    Entries below 1e-14 are pruned.  With `spot_fraction` > 0 a random sample
    of the rejected triples is integrated on `grid` and must vanish to 1e-13
    relative to the largest entry.
    """
    if grid is not None and grid.geometry != basis.geometry:
        raise UsageError("basis and grid live on different geometries")
    tri = _candidates(basis)
    vals = _triad_values(basis, tri)
    keep = np.abs(vals) >= PRUNE
    spot_n, spot_max = 0, 0.0
    if spot_fraction > 0:
        if grid is None:
            raise UsageError("spot checks need a quadrature grid")
        sample = _rejected_sample(basis, tri, spot_fraction, np.random.default_rng(seed))
        if len(sample):
            spot = quadrature_triads(grid, basis, sample)
            spot_n, spot_max = len(sample), float(np.abs(spot).max())
            # rounding noise of a 2-D quadrature scales with the entry sizes
            scale = max(1.0, float(np.abs(vals).max())) if len(vals) else 1.0
            if spot_max > SPOT_TOL * scale:
                raise UsageError(f"selection rule rejected a nonzero triad ({spot_max:.3e})")
    tri, vals = tri[keep], vals[keep]
    return _make(basis, tri[:, 0], tri[:, 1], tri[:, 2], vals, len(keep), spot_n, spot_max)


def assemble_rhs_data(triads, density, eps):
    """Attach the density coefficients gamma and the regularization eps."""
    if eps < 0:
        raise UsageError("eps must be non-negative")
    gamma = np.asarray(getattr(density, "gamma", density), dtype=float)
    if density is not None and getattr(density, "basis", triads.basis) is not triads.basis:
        if getattr(density, "basis").n != triads.n:
            raise UsageError("density and tensors were built on different bases")
    if gamma.shape != (triads.n,):
        raise UsageError("density coefficients do not match the basis size")
    return replace(triads, gamma=gamma.copy(), eps=float(eps))
