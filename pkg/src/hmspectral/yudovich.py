"""Yudovich growth functions, the Osgood modulus Phi_theta and its checks.

For a growth function theta,

    Phi_theta(r) = inf_{0 < eps < 1/2} (2/eps) theta(2/eps) r^{eps/2}   (r >= 1)
    Phi_theta(r) = inf_{0 < eps < 1/2} (2/eps) theta(2/eps)             (r < 1)

and uniqueness holds when int_0^1 dr / (r Phi_theta(1/r)) diverges.  With
u = log(1/r) that integral is int_0^inf du / Phi_theta(e^u); the
minimization is carried out in log space so u may be astronomically large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .quadrature import lp_norm

KINDS = ("constant", "log", "power", "table")
_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


@dataclass(frozen=True)
class GrowthFunction:
    kind: str = "constant"
    beta: float = 1.0
    table_p: tuple = ()
    table_theta: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown growth function kind {self.kind!r}")
        if self.kind == "power" and not self.beta > 0:
            raise ValueError("power growth needs beta > 0")
        if self.kind == "table":
            p = np.asarray(self.table_p, dtype=float)
            th = np.asarray(self.table_theta, dtype=float)
            if p.size < 1 or p.shape != th.shape:
                raise ValueError("table growth needs matching p and theta columns")
            if np.any(np.diff(p) <= 0) or np.any(th <= 0) or np.any(np.diff(th) < 0):
                raise ValueError("table growth must be positive and non-decreasing in p")

    @classmethod
    def parse(cls, text, table_loader=None):
        """'const', 'log', 'power:BETA' or 'table:FILE' (two columns p theta)."""
        if text in ("const", "constant"):
            return cls("constant")
        if text == "log":
            return cls("log")
        if text.startswith("power"):
            _, _, beta = text.partition(":")
            return cls("power", beta=float(beta or 1.0))
        if text.startswith("table:"):
            path = text.split(":", 1)[1]
            data = np.loadtxt(path, ndmin=2) if table_loader is None else table_loader(path)
            return cls("table", table_p=tuple(data[:, 0]), table_theta=tuple(data[:, 1]))
        raise ValueError(f"cannot parse growth function {text!r}")

    def label(self):
        if self.kind == "power":
            return f"power:{self.beta:g}"
        return self.kind

    def log_theta(self, p):
        """log theta(p), vectorized; stays finite for p up to ~1e300."""
        p = np.asarray(p, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(p)
        if self.kind == "log":
            return np.log(np.log1p(p))
        if self.kind == "power":
            return self.beta * np.log(p)
        tp = np.asarray(self.table_p)
        th = np.asarray(self.table_theta)
        # flat extrapolation outside the tabulated range
        return np.log(np.interp(p, tp, th))

    def __call__(self, p):
        return np.exp(self.log_theta(p))

    def extrapolated(self, p):
        return self.kind == "table" and (p < self.table_p[0] or p > self.table_p[-1])


def _log_objective(theta, eps, log_r):
    # log of (2/eps) theta(2/eps) r^{eps/2}
    return math.log(2.0) - np.log(eps) + theta.log_theta(2.0 / eps) + 0.5 * eps * log_r


def log_phi_theta(theta, log_r):
    """log Phi_theta(r) given log r (r < 1 uses the r-free branch)."""
    L = max(float(log_r), 0.0)
    hi = 0.5
    lo = min(1e-6, 0.01 / L) if L > 0 else 1e-6
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), 241))
    vals = _log_objective(theta, grid, L)
    k = int(np.argmin(vals))
    best = float(vals[k])
    if k == grid.size - 1:
        # infimum at the eps -> 1/2 end; the objective is continuous there
        return best
    a = math.log(grid[max(k - 1, 0)])
    b = math.log(grid[min(k + 1, grid.size - 1)])
    f = lambda x: float(_log_objective(theta, np.exp(x), L))
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-9:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return min(best, fc, fd)


def phi_theta(theta, r):
    """Phi_theta(r) for r >= 0."""
    if r < 0:
        raise ValueError("Phi_theta is defined for r >= 0")
    log_r = math.log(r) if r > 0 else -math.inf
    return math.exp(log_phi_theta(theta, log_r))


def _osgood_piece(theta, u0, u1):
    """int_{u0}^{u1} du / Phi_theta(e^u), integrated in v = log u."""
    f = lambda v: math.exp(v - log_phi_theta(theta, math.exp(v)))
    val, _ = integrate.quad(f, math.log(u0), math.log(u1), epsabs=0.0, epsrel=1e-10, limit=200)
    return val


@dataclass
class YudovichReport:
    p_grid: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    sup_ratio: float = math.nan
    increasing_at_top: bool = False
    osgood_verdict: str = ""
    increments: list = field(default_factory=list)
    decimal_increments: list = field(default_factory=list)
    note: str = ""

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _classify(inc):
    inc = np.asarray(inc, dtype=float)
    tail = inc[-3:]
    prev = np.maximum(tail[:-1], 1e-300)
    ratios = np.where(tail[:-1] > 0, tail[1:] / prev, 0.0)
    if np.all(ratios < 0.7):
        return "convergent"
    if tail.min() >= 0.8 * tail.max() or np.all(np.diff(tail) >= 0):
        return "divergent"
    return "inconclusive"


def osgood_test(theta, levels=7):
    """Classify divergence of int_0^1 dr / (r Phi_theta(1/r)).

    Increments are integrals over u = log(1/r) in [U_k, U_k^2] with
    U_0 = log 100: for Phi ~ u these grow, for Phi ~ u log u they are
    constant and for Phi ~ u^2 they shrink geometrically.  The increments
    over the decimal grid r0 = 1e-2, 1e-4, ..., 1e-16 are reported as well.
    """
    U = math.log(100.0)
    inc = []
    for _ in range(levels):
        inc.append(_osgood_piece(theta, U, U * U))
        U = U * U
    dec = []
    for k in range(1, 8):
        dec.append(_osgood_piece(theta, k * math.log(100.0), (k + 1) * math.log(100.0)))
    verdict = _classify(inc)
    notes = {"divergent": "Osgood integral diverges: uniqueness criterion satisfied",
             "convergent": "Osgood integral converges: no uniqueness guarantee",
             "inconclusive": "increment trend is inconclusive"}
    note = notes[verdict]
    if theta.kind == "table":
        note += (f"; theta extrapolated flat outside p in [{theta.table_p[0]:g}, "
                 f"{theta.table_p[-1]:g}]")
    return YudovichReport(osgood_verdict=verdict, increments=inc, decimal_increments=dec,
                          note=note)


def yudovich_norm(f, theta, p_grid):
    """sup_p ||f||_p / theta(p) over `p_grid` and its trend at the top of the grid."""
    ps = [float(p) for p in p_grid]
    if any(p < 1 or p > 64 for p in ps):
        raise ValueError("p grid must lie in [1, 64]")
    norms = [lp_norm(f, p) for p in ps]
    ratios = [nv / float(theta(p)) for nv, p in zip(norms, ps)]
    top = np.asarray(ratios[-3:])
    rising = bool(len(top) >= 2 and np.all(np.diff(top) > 1e-3 * top[:-1]))
    note = ("ratio still increasing at the top of the grid: likely outside this Yudovich class"
            if rising else "ratio bounded over the grid")
    return YudovichReport(ps, norms, ratios, float(max(ratios)), rising, note=note)


def uniqueness_summary(f, p_grid, candidates=None):
    """Which growth classes contain f, and whether any of them is Osgood-divergent."""
    if candidates is None:
        candidates = [GrowthFunction("constant"), GrowthFunction("log"),
                      GrowthFunction("power", beta=1.0)]
    rows = []
    covered = False
    for th in candidates:
        rep = yudovich_norm(f, th, p_grid)
        verdict = osgood_test(th).osgood_verdict
        member = not rep.increasing_at_top
        covered = covered or (member and verdict == "divergent")
        rows.append({"theta": th.label(), "sup_ratio": rep.sup_ratio, "top_ratio": rep.ratios[-1],
                     "member": member, "osgood": verdict})
    if covered:
        note = "f lies in an Osgood-divergent Yudovich class: the uniqueness criterion applies"
    else:
        note = ("f lies in no Osgood-divergent Yudovich class among the candidates: "
                "the uniqueness criterion does not cover it (existence without a uniqueness guarantee)")
    return {"classes": rows, "uniqueness_covered": covered, "note": note}


@dataclass
class Envelope:
    times: np.ndarray
    values: np.ndarray
    truncated: bool = False

    def at(self, t):
        """Envelope value at time(s) t; +inf past a truncation point."""
        t = np.asarray(t, dtype=float)
        finite = np.isfinite(self.values)
        out = np.interp(t, self.times[finite], self.values[finite])
        if self.truncated:
            out = np.where(t > self.times[finite][-1], math.inf, out)
        return out


class _PhiTable:
    """log Phi_theta tabulated against log(log r) for fast envelope stepping."""

    def __init__(self, theta, log_r_max):
        self.floor = log_phi_theta(theta, 0.0)
        hi = math.log(max(log_r_max, 1.0)) + 0.5
        self.s = np.linspace(math.log(1e-6), hi, 4001)
        self.v = np.array([log_phi_theta(theta, math.exp(x)) for x in self.s])
        self.v = np.maximum.accumulate(self.v)

    def __call__(self, log_r):
        if log_r <= 1e-6:
            return self.floor
        return float(np.interp(math.log(log_r), self.s, self.v))


def osgood_envelope(theta, lam, y0, t_end, y_cap=None, max_steps=2_000_000):
    """Integrate Y' = lam Y Phi_theta(1/Y) with RK4, relative change < 1e-3 per step.

    The modulus is tabulated once (log Phi against log log(1/Y)) and
    interpolated.  The curve stops with `truncated` set when Y overflows or
    passes `y_cap`; beyond that point the envelope is effectively infinite.
    """
    if not y0 > 0:
        raise ValueError("envelope needs y0 > 0")
    if lam < 0:
        raise ValueError("envelope rate must be non-negative")
    if lam == 0:
        return Envelope(np.array([0.0, t_end]), np.array([float(y0), float(y0)]))
    table = _PhiTable(theta, -math.log(y0))
    cap = 1e300 if y_cap is None else float(y_cap)

    def f(y):
        return lam * y * math.exp(table(-math.log(y)))

    t, y = 0.0, float(y0)
    ts, ys = [t], [y]
    truncated = False
    for _ in range(max_steps):
        if t >= t_end:
            break
        k1 = f(y)
        dt = min(t_end - t, 1e-3 * y / k1)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y_new = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        y = max(y_new, y)
        ts.append(t)
        ys.append(y)
        if not math.isfinite(y) or y > cap:
            truncated = True
            break
    else:
        truncated = True
    values = np.array(ys)
    if truncated:
        values[-1] = math.inf
    return Envelope(np.array(ts), values, truncated)
