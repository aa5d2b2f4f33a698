"""Norm and estimate monitors evaluated along trajectories.

Spectral norms are diagonal sums over the coefficients c (and gamma):

    ||phi||_V^2 = sum (1 + mu) c^2
    ||phi||_W^2 = sum [(1 + mu) + (1 + mu)^2] c^2
    ||phi - Delta phi||_2^2 = sum (1 + mu)^2 c^2

Pointwise quantities such as ||phi - Delta phi + g_delta||_p are sampled on
the quadrature grid from the coefficients (1 + mu) c + gamma.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import rhs
from .quadrature import lp_norm_values

DEFAULT_P = (2.0, 4.0, 8.0, 16.0)
# declared slack for limit inequalities checked at finite n
TOL_SCHEDULE = {12: 0.25, 24: 0.10, 48: 0.05}


def tol_for(n):
    """Slack tol(n) from the schedule (the entry for the largest n_k <= n)."""
    keys = sorted(TOL_SCHEDULE)
    best = TOL_SCHEDULE[keys[0]]
    for k in keys:
        if n >= k:
            best = TOL_SCHEDULE[k]
    return best


@dataclass(frozen=True)
class MonitorSpec:
    p_list: tuple = DEFAULT_P
    track_linf: bool = True
    track_weak_residual: bool = False
    energy_identity: bool = True

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_list)
        if any(p < 1 for p in ps):
            raise ValueError("monitored exponents must be >= 1")
        object.__setattr__(self, "p_list", tuple(sorted(ps)))


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    normV2: float
    normW2: float
    enstrophy2: float
    lp: tuple
    linf: float
    linf_vorticity: float
    dissipation: float
    weak_residual: float = math.nan


def spectral_norms(c, mu):
    a = 1.0 + mu
    v2 = float(np.sum(a * c * c))
    z2 = float(np.sum(a * a * c * c))
    return v2, v2 + z2, z2


class Monitor:
    """Monitor bound to one basis, grid, density and tensor set."""

    def __init__(self, spec, grid, density, tensors):
        self.spec = spec
        self.grid = grid
        self.density = density
        self.tensors = tensors
        self.basis = tensors.basis
        self.values = grid.basis_samples(self.basis, 1 if spec.track_weak_residual else 0).value

    def record(self, state):
        c = state.coeffs
        mu = self.basis.mu
        gamma = self.tensors.gamma
        eps = self.tensors.eps
        v2, w2, z2 = spectral_norms(c, mu)
        q = (1.0 + mu) * c + gamma
        qv = q @ self.values
        w = self.grid.weights
        lp = tuple(lp_norm_values(qv, w, p) for p in self.spec.p_list)
        linf = lp_norm_values(qv, w, math.inf) if self.spec.track_linf else math.nan
        lv = (lp_norm_values(((1.0 + mu) * c) @ self.values, w, math.inf)
              if self.spec.track_linf else math.nan)
        # 2 eps (||grad phi||^2 + ||Delta phi||^2) - 2 eps (g_delta, Delta phi)
        diss = 2.0 * eps * float(np.sum(mu * c * c) + np.sum(mu * mu * c * c)
                                 + np.sum(mu * gamma * c))
        weak = math.nan
        if self.spec.track_weak_residual:
            weak = weak_residual(state, self.density, self.tensors, self.grid)["max"]
        return MonitorRecord(float(state.t), v2, w2, z2, lp, linf, lv, diss, weak)


@dataclass
class MonitorSeries:
    p_list: tuple
    records: list = field(default_factory=list)

    @classmethod
    def from_records(cls, spec, records):
        return cls(spec.p_list, list(records))

    @property
    def times(self):
        return np.array([r.t for r in self.records])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def lp(self, p):
        k = self.p_list.index(float(p))
        return np.array([r.lp[k] for r in self.records])

    def energy_residuals(self):
        """d/dt ||phi||_V^2 (finite differences) plus the spectral dissipation.

        Second-order differences in time; the identity says the sum is 0.
        """
        t = self.times
        v2 = self.column("normV2")
        if t.size < 3:
            return np.full(t.size, math.nan)
        rate = np.gradient(v2, t, edge_order=2)
        return rate + self.column("dissipation")

    def energy_scale(self):
        t = self.times
        v2 = self.column("normV2")
        rate = np.gradient(v2, t, edge_order=2) if t.size >= 3 else np.zeros_like(v2)
        return float(max(np.abs(rate).max(initial=0.0), np.abs(self.column("dissipation")).max(initial=0.0)))

    def to_csv(self, path):
        header = (["t", "normV2", "normW2", "enstrophy2"]
                  + [f"lp{_fmt_p(p)}" for p in self.p_list]
                  + ["linf", "energy_residual", "weak_residual"])
        res = self.energy_residuals()
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for r, e in zip(self.records, res):
                row = [r.t, r.normV2, r.normW2, r.enstrophy2, *r.lp, r.linf, e, r.weak_residual]
                out.writerow([_fmt(v) for v in row])


def _fmt_p(p):
    return str(int(p)) if float(p).is_integer() else repr(p)


def _fmt(x):
    return repr(float(x))


def check_lp_budget(series, initial_budget=None, tol=0.05):
    """Max over time of ||phi - Delta phi + g_delta||_p relative to the start."""
    report = {}
    for k, p in enumerate(series.p_list):
        vals = np.array([r.lp[k] for r in series.records])
        base = vals[0] if initial_budget is None else initial_budget[p]
        ratio = float(vals.max() / base) if base > 0 else (0.0 if vals.max() == 0 else math.inf)
        report[p] = {"max_ratio": ratio, "tol": tol, "ok": ratio <= 1.0 + tol,
                     "empirical_K": 4.0 * (1.0 + 2.0 * ratio)}
    return report


def linf_report(series, density, tol=0.05):
    """Invariant-region and final L^inf bounds for bounded densities."""
    K = series.records[0].linf
    worst = float(series.column("linf").max())
    vort0 = series.records[0].linf_vorticity
    g_inf = float(np.abs(density.g.values).max())
    bound = 2.0 * (vort0 + g_inf)
    worst_vort = float(series.column("linf_vorticity").max())
    return {
        "K": K,
        "max_linf": worst,
        "ratio": worst / K if K > 0 else 0.0,
        "ok": worst <= K * (1.0 + tol),
        "vorticity_bound": bound,
        "max_linf_vorticity": worst_vort,
        "vorticity_ok": worst_vort <= bound * (1.0 + tol),
    }


def weak_residual(state, density, tensors, grid, test_basis=None, dcdt=None):
    """Residual of the weak form against test modes, by direct quadrature.

    For psi = e_k the residual is
        <d/dt (phi - Delta phi), psi> + (grad_perp phi . grad(g - Delta phi), psi)
        + eps (mu-weighted linear terms, as the projection of Delta(phi - Delta phi + g))
    with every inner product computed on `grid`; d/dt c comes from the tensor
    right-hand side unless `dcdt` is given.  `test_basis` may extend the run's
    basis (its first n modes must coincide with it).
    """
    basis = tensors.basis
    test = test_basis or basis
    n = basis.n
    c = state.coeffs
    mu = basis.mu
    gamma = tensors.gamma
    eps = tensors.eps
    if dcdt is None:
        dcdt = rhs(state, tensors)
    bs = grid.basis_samples(basis, 1)
    ts = grid.basis_samples(test, 0) if test is not basis else bs
    w = grid.weights
    grad_phi = np.einsum("i,ipa->pa", c, bs.gradient)
    # g_delta - Delta phi has coefficients gamma + mu c
    grad_s = np.einsum("i,ipa->pa", gamma + mu * c, bs.gradient)
    # grad_perp phi . grad s = -phi_y s_x + phi_x s_y
    jac = grad_phi[:, 0] * grad_s[:, 1] - grad_phi[:, 1] * grad_s[:, 0]
    adv = ts.value @ (w * jac)
    # (1 + mu) dc/dt + eps mu ((1 + mu) c + gamma), mapped through the test Gram
    lin = (1.0 + mu) * dcdt + eps * mu * ((1.0 + mu) * c + gamma)
    lin_field = lin @ bs.value
    lin_proj = ts.value @ (w * lin_field)
    res = lin_proj + adv
    scale = max(float(np.abs(adv).max(initial=0.0)), float(np.abs(lin_proj).max(initial=0.0)), 1e-300)
    in_span = np.abs(res[:n]) if test.n >= n else np.abs(res)
    return {
        "residuals": res,
        "max": float(np.abs(res).max(initial=0.0)),
        "max_in_span": float(in_span.max(initial=0.0)),
        "max_outside": float(np.abs(res[n:]).max(initial=0.0)) if test.n > n else 0.0,
        "scale": scale,
    }


def v_bound_report(series, gamma, eps):
    """||phi(t)||_V^2 <= ||phi_0||_V^2 + (t/2) ||g_delta||_2^2 (and the eps-sharp form)."""
    t = series.times
    v2 = series.column("normV2")
    g2 = float(np.sum(np.asarray(gamma) ** 2))
    loose = v2[0] + 0.5 * t * g2
    sharp = v2[0] + 0.5 * eps * t * g2
    return {"margin": float(np.min(loose - v2)), "sharp_margin": float(np.min(sharp - v2)),
            "ok": bool(np.all(v2 <= loose * (1 + 1e-12) + 1e-300))}


def embedding_constant(basis, grid):
    """sqrt(max_i ||grad e_i||_4^2 / ||e_i||_W^2): finite-basis estimate of W -> W^{1,4}."""
    bs = grid.basis_samples(basis, 1)
    w = grid.weights
    gnorm = np.sqrt(np.sum(bs.gradient ** 2, axis=-1))
    l4 = np.sum(w * gnorm ** 4, axis=1) ** 0.25
    wnorm2 = (1.0 + basis.mu) + (1.0 + basis.mu) ** 2
    return float(np.sqrt(np.max(l4 ** 2 / wnorm2)))


def w_bound_report(series, gamma, mu, eps, C):
    """||phi(t)||_W^2 <= [||phi_0||_W^2 + (eps t/2) ||g||_W^2] exp(C ||g||_W t)."""
    t = series.times
    w2 = series.column("normW2")
    a = 1.0 + mu
    gW = math.sqrt(float(np.sum((a + a * a) * gamma ** 2)))
    bound = (w2[0] + 0.5 * eps * t * gW ** 2) * np.exp(C * gW * t)
    return {"C": C, "margin": float(np.min(bound - w2)), "ok": bool(np.all(w2 <= bound * (1 + 1e-12)))}
