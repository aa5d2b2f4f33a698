"""Config-driven runs, sweeps and the stability/uniqueness probes.

A run is described by an INI file with the sections

    [geometry]    kind, radius, side, n_modes
    [density]     profile, alpha, sigma, c, eta, delta, truncate
    [initial]     preset, mode, amplitude, mu_min, mu_max, w_target, file, smooth_eps
    [integrator]  scheme, dt, t_end, sample_every, eps
    [monitors]    p_list, linf, weak_residual
    [run]         seed, out, dump_tensors
    [sweep]       n_list, eps_list, delta_list
    [twin]        scales, growth
    [cz]          p_list, trials

Every key is optional; see CONFIG_KEYS for defaults and meaning.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg

from . import __version__
from .basis import Geometry, build_basis
from .coupling import assemble_rhs_data, assemble_triads
from .density import DensitySpec, build_density, smooth_initial_field, zero_density
from .dynamics import (IntegratorConfig, SpectralField, integrate, jacobian, read_snapshot,
                       write_snapshot)
from .errors import ConfigError
from .monitors import (Monitor, MonitorSeries, MonitorSpec, check_lp_budget, v_bound_report,
                       weak_residual)
from .quadrature import SampledField, lp_norm, lp_norm_values, make_grid
from .yudovich import GrowthFunction, osgood_envelope, phi_theta

PRESETS = ("zero", "single_mode", "random_band", "file")

CONFIG_KEYS = {
    "geometry": {
        "kind": ("disk", "disk or square"),
        "radius": ("1.0", "disk radius R"),
        "side": ("1.0", "square side L"),
        "n_modes": ("24", "number of Galerkin modes"),
    },
    "density": {
        "profile": ("power_law", "power_law, gaussian or constant"),
        "alpha": ("1.0", "power-law exponent (n0 = rho^alpha + eta)"),
        "sigma": ("1.0", "gaussian width"),
        "c": ("1.0", "constant density value"),
        "eta": ("0.0", "density floor; 0 makes power_law singular"),
        "delta": ("0.01", "elliptic regularization parameter (> 0 when singular)"),
        "truncate": ("false", "clip g to +-1/delta before regularizing"),
    },
    "initial": {
        "preset": ("random_band", "zero, single_mode, random_band or file"),
        "mode": ("0", "single_mode: mode index"),
        "amplitude": ("1.0", "single_mode: coefficient"),
        "mu_min": ("0.0", "random_band: lower eigenvalue"),
        "mu_max": ("40.0", "random_band: upper eigenvalue"),
        "w_target": ("1.0", "random_band: W-norm of the initial field"),
        "file": ("", "file: HMS1 snapshot or whitespace-separated coefficients"),
        "smooth_eps": ("0.0", "optional smoothing of the initial field"),
    },
    "integrator": {
        "scheme": ("if_rk4", "if_rk4 (integrating factor) or rk4"),
        "dt": ("0.001", "time step"),
        "t_end": ("1.0", "final time"),
        "sample_every": ("10", "steps between monitor samples"),
        "eps": ("0.01", "fourth-order regularization epsilon (>= 0)"),
    },
    "monitors": {
        "p_list": ("2,4,8,16", "exponents of the potential-vorticity budgets"),
        "linf": ("true", "track node maxima"),
        "weak_residual": ("false", "track the weak-form residual (slow)"),
    },
    "run": {
        "seed": ("0", "seed for random presets and perturbations"),
        "out": ("out", "output directory"),
        "dump_tensors": ("false", "write the coupling tensor (HMT1) next to the run"),
    },
    "sweep": {
        "n_list": ("12,24,48", "converge-n basis sizes"),
        "eps_list": ("0.1,0.03,0.01,0.003", "eps-sweep values (descending)"),
        "delta_list": ("0.1,0.01,0.001,0.0001", "delta-sweep values (descending)"),
    },
    "twin": {
        "scales": ("0.01,0.001,0.0001", "perturbation sizes (descending)"),
        "growth": ("const", "growth function for the envelope: const, log, power:B, table:FILE"),
    },
    "cz": {
        "p_list": ("2,4,8,16,32,64", "exponents of the W^{2,p} study"),
        "trials": ("20", "number of random fields"),
    },
}


def _floats(text):
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class InitialCondition:
    preset: str = "random_band"
    mode: int = 0
    amplitude: float = 1.0
    mu_min: float = 0.0
    mu_max: float = 40.0
    w_target: float = 1.0
    file: str = ""
    smooth_eps: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    geometry: Geometry = field(default_factory=Geometry.disk)
    n_modes: int = 24
    density: DensitySpec = field(default_factory=DensitySpec)
    delta: float = 1e-2
    truncate: bool = False
    initial: InitialCondition = field(default_factory=InitialCondition)
    eps: float = 1e-2
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(sample_every=10))
    monitors: MonitorSpec = field(default_factory=MonitorSpec)
    out: str = "out"
    seed: int = 0
    dump_tensors: bool = False
    n_list: tuple = (12, 24, 48)
    eps_list: tuple = (1e-1, 3e-2, 1e-2, 3e-3)
    delta_list: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    scales: tuple = (1e-2, 1e-3, 1e-4)
    growth: str = "const"
    cz_p_list: tuple = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    cz_trials: int = 20

    def __post_init__(self):
        if self.n_modes < 1:
            raise ConfigError("n_modes must be positive")
        if not self.eps >= 0:
            raise ConfigError("eps must be >= 0")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.density.singular and self.delta == 0:
            raise ConfigError("a singular density (power_law with eta = 0) must be regularized: "
                              "set delta > 0")
        if self.initial.preset not in PRESETS:
            raise ConfigError(f"unknown initial preset {self.initial.preset!r}")
        if self.initial.preset == "file" and not os.path.isfile(self.initial.file):
            raise ConfigError(f"initial-condition file {self.initial.file!r} does not exist")
        if self.initial.smooth_eps < 0:
            raise ConfigError("smooth_eps must be >= 0")
        if self.growth.startswith("table:") and not os.path.isfile(self.growth[6:]):
            raise ConfigError(f"growth table {self.growth[6:]!r} does not exist")
        if self.cz_trials < 1 or any(p < 2 or p > 64 for p in self.cz_p_list):
            raise ConfigError("cz needs trials >= 1 and exponents in [2, 64]")

    def echo(self):
        d = asdict(self)
        d["geometry"] = self.geometry.describe()
        return json.loads(json.dumps(d, default=str))


def load_config(path=None, overrides=None):
    """Read an INI file (or only defaults) into a RunConfig.

    `overrides` maps "section.key" to a string value and wins over the file.
    """
    cp = configparser.ConfigParser()
    cp.read_dict({s: {k: v[0] for k, v in keys.items()} for s, keys in CONFIG_KEYS.items()})
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path!r} does not exist")
        user = configparser.ConfigParser()
        user.read(path)
        for sec in user.sections():
            if sec not in CONFIG_KEYS:
                raise ConfigError(f"unknown config section [{sec}]")
            for key, val in user.items(sec):
                if key not in CONFIG_KEYS[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                cp.set(sec, key, val)
    for dotted, val in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if sec not in CONFIG_KEYS or key not in CONFIG_KEYS[sec]:
            raise ConfigError(f"unknown config key {dotted!r}")
        cp.set(sec, key, str(val))
    try:
        return _from_parser(cp)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _from_parser(cp):
    g = cp["geometry"]
    kind = g["kind"]
    if kind == "disk":
        geo = Geometry.disk(float(g["radius"]))
    elif kind == "square":
        geo = Geometry.square(float(g["side"]))
    else:
        raise ConfigError(f"unknown geometry {kind!r}")
    d = cp["density"]
    spec = DensitySpec(d["profile"], float(d["alpha"]), float(d["sigma"]), float(d["c"]),
                       float(d["eta"]))
    i = cp["initial"]
    init = InitialCondition(i["preset"], int(i["mode"]), float(i["amplitude"]), float(i["mu_min"]),
                            float(i["mu_max"]), float(i["w_target"]), i["file"],
                            float(i["smooth_eps"]))
    it = cp["integrator"]
    integ = IntegratorConfig(it["scheme"], float(it["dt"]), float(it["t_end"]),
                             int(it["sample_every"]))
    m = cp["monitors"]
    mon = MonitorSpec(_floats(m["p_list"]), _bool(m["linf"]), _bool(m["weak_residual"]))
    r, s, tw, cz = cp["run"], cp["sweep"], cp["twin"], cp["cz"]
    return RunConfig(
        geometry=geo, n_modes=int(g["n_modes"]), density=spec, delta=float(d["delta"]),
        truncate=_bool(d["truncate"]), initial=init, eps=float(it["eps"]), integrator=integ,
        monitors=mon, out=r["out"], seed=int(r["seed"]), dump_tensors=_bool(r["dump_tensors"]),
        n_list=tuple(int(x) for x in _floats(s["n_list"])), eps_list=_floats(s["eps_list"]),
        delta_list=_floats(s["delta_list"]), scales=_floats(tw["scales"]), growth=tw["growth"],
        cz_p_list=_floats(cz["p_list"]), cz_trials=int(cz["trials"]),
    )


def config_help():
    lines = ["config keys (INI sections):"]
    for sec, keys in CONFIG_KEYS.items():
        lines.append(f"  [{sec}]")
        for k, (default, text) in keys.items():
            lines.append(f"    {k} = {default:<22} {text}")
    return "\n".join(lines)


# -- setup --------------------------------------------------------------------

@lru_cache(maxsize=8)
def prepare(geometry, n):
    """Basis, grid and bare triad tensor for (geometry, n); cached."""
    basis = build_basis(geometry, n)
    grid = make_grid(geometry, basis)
    triads = assemble_triads(basis, grid)
    return basis, grid, triads


def w_norm(c, mu):
    a = 1.0 + mu
    return math.sqrt(float(np.sum((a + a * a) * c * c)))


def v_norm(c, mu):
    return math.sqrt(float(np.sum((1.0 + mu) * c * c)))


def initial_state(config, basis):
    ic = config.initial
    c = np.zeros(basis.n)
    if ic.preset == "single_mode":
        if not 0 <= ic.mode < basis.n:
            raise ConfigError(f"mode index {ic.mode} outside the basis (n = {basis.n})")
        c[ic.mode] = ic.amplitude
    elif ic.preset == "random_band":
        band = np.flatnonzero((basis.mu >= ic.mu_min) & (basis.mu <= ic.mu_max))
        if band.size == 0:
            raise ConfigError("random_band selects no modes of the basis")
        rng = np.random.default_rng(config.seed)
        c[band] = rng.standard_normal(band.size)
        c *= ic.w_target / w_norm(c, basis.mu)
    elif ic.preset == "file":
        c = _load_coefficients(ic.file, basis)
    state = SpectralField(basis, c)
    if ic.smooth_eps > 0:
        state = smooth_initial_field(state, ic.smooth_eps)
    return state


def _load_coefficients(path, basis):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"HMS1":
        return read_snapshot(path, basis).coeffs
    c = np.loadtxt(path, ndmin=1).ravel()
    if c.size != basis.n:
        raise ConfigError(f"{path}: {c.size} coefficients for a basis of {basis.n}")
    return c


@dataclass
class RunResult:
    config: RunConfig
    basis: object
    grid: object
    density: object
    tensors: object
    trajectory: object
    series: MonitorSeries
    manifest: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.trajectory.coeffs[-1]


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def simulate(config, state0=None, write=True):
    """Build basis, grid, density and tensors, integrate and (optionally) write outputs."""
    timings = {}
    t0 = time.perf_counter()
    basis, grid, triads = prepare(config.geometry, config.n_modes)
    timings["setup"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    if config.density.profile == "constant":
        density = zero_density(basis, grid)
    else:
        density = build_density(config.density, basis, grid, config.delta, config.truncate)
    tensors = assemble_rhs_data(triads, density, config.eps)
    timings["density"] = time.perf_counter() - t0
    if state0 is None:
        state0 = initial_state(config, basis)
    monitor = Monitor(config.monitors, grid, density, tensors)
    t0 = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        traj = integrate(state0, tensors, config.integrator, monitor)
    timings["integrate"] = time.perf_counter() - t0
    series = MonitorSeries.from_records(config.monitors, traj.records)
    result = RunResult(config, basis, grid, density, tensors, traj, series)
    result.manifest = {
        "config": config.echo(),
        "version": __version__,
        "basis_checksum": hashlib.sha256(basis.checksum_bytes()).hexdigest(),
        "tensor_checksum": triads.checksum(),
        "status": traj.status,
        "message": traj.message,
        "files": {},
        "timings": timings,
    }
    if write:
        _write_outputs(result, Path(config.out))
    return result


def _write_outputs(result, out):
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    traj = result.trajectory
    names = ["monitors.csv", "initial.hms", "final.hms"]
    result.series.to_csv(out / "monitors.csv")
    write_snapshot(out / "initial.hms", traj.state(0))
    write_snapshot(out / "final.hms", traj.final)
    if result.config.dump_tensors:
        result.tensors.dump(out / "tensors.hmt")
        names.append("tensors.hmt")
    result.manifest["timings"]["write"] = time.perf_counter() - t0
    result.manifest["files"] = {n: {"size": (out / n).stat().st_size, "sha256": _sha256(out / n)}
                                for n in names}
    (out / "manifest.json").write_text(json.dumps(result.manifest, indent=2) + "\n")


def run(config):
    """Run one configuration and write monitors.csv, snapshots and manifest.json."""
    return simulate(config, write=True)


# -- sweeps -------------------------------------------------------------------

def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _member(config, sub, write, **changes):
    cfg = replace(config, out=str(Path(config.out) / sub), **changes)
    return simulate(cfg, write=write)


def _decreasing(values, slack):
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] * (1.0 + slack)))


def _lp_ratios(result):
    rep = check_lp_budget(result.series)
    return {str(p): r["max_ratio"] for p, r in rep.items()}


def converge_n(config, n_list=None, threads=1, write=False):
    """Self-convergence in n: V-distances between consecutive runs on the coarser span."""
    ns = list(n_list or config.n_list)
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n_list must be ascending with at least two entries")
    # the initial field is drawn on the coarsest basis so every run starts identically
    coarse_basis = prepare(config.geometry, ns[0])[0]
    c0 = initial_state(replace(config, n_modes=ns[0]), coarse_basis).coeffs
    for n in ns:
        prepare(config.geometry, n)

    def job(n):
        basis = prepare(config.geometry, n)[0]
        c = np.zeros(n)
        c[: ns[0]] = c0
        cfg = replace(config, n_modes=n, out=str(Path(config.out) / f"n{n}"))
        return simulate(cfg, SpectralField(basis, c), write)

    results = _map(job, ns, threads)
    dists = []
    for a, b in zip(results, results[1:]):
        k = a.basis.n
        dists.append(v_norm(b.final[:k] - a.final, a.basis.mu))
    slope = (math.log(dists[-1] / dists[0]) / math.log(ns[-1] / ns[1])
             if len(dists) > 1 and dists[0] > 0 and dists[-1] > 0 else math.nan)
    return {
        "n_list": ns,
        "distances": dists,
        "decreasing": _decreasing(dists, 0.10),
        "spectral_slope": slope,
        "lp_ratios": {str(n): _lp_ratios(r) for n, r in zip(ns, results)},
        "status": [r.trajectory.status for r in results],
    }


def eps_sweep(config, eps_list=None, threads=1, write=False):
    """Terminal states along a descending eps grid, plus the eps = 0 reference run."""
    eps = list(eps_list or config.eps_list)
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps_list must be positive and strictly descending")
    results = _map(lambda e: _member(config, f"eps{e:g}", write, eps=e), eps + [0.0], threads)
    limit = results[-1]
    results = results[:-1]
    mu = limit.basis.mu
    cauchy = [v_norm(b.final - a.final, mu) for a, b in zip(results, results[1:])]
    to_limit = [v_norm(r.final - limit.final, mu) for r in results]
    last = results[-1]
    inviscid = replace(last.tensors, eps=0.0)
    weak = weak_residual(last.trajectory.final, last.density, inviscid, last.grid)
    vb = [v_bound_report(r.series, r.tensors.gamma, e) for r, e in zip(results, eps)]
    return {
        "eps_list": eps,
        "cauchy_distances": cauchy,
        "decreasing": _decreasing(cauchy, 0.0),
        "distance_to_eps0": to_limit,
        "weak_residual_eps0": {"max": weak["max"], "scale": weak["scale"]},
        "v_bound_margins": [v["margin"] for v in vb],
        "v_bound_ok": all(v["ok"] for v in vb),
        "status": [r.trajectory.status for r in results],
    }


def delta_sweep(config, delta_list=None, threads=1, write=False, p_list=(1.5, 2.0, 4.0, 8.0)):
    """g_delta -> g trends and sensitivity of the terminal field to delta."""
    deltas = list(delta_list or config.delta_list)
    if any(d <= 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("delta_list must be positive and strictly descending")
    results = _map(lambda d: _member(config, f"delta{d:g}", write, delta=d), deltas, threads)
    grid = results[0].grid
    g = results[0].density.g
    gaps = {str(p): [] for p in p_list}
    sup = []
    for r in results:
        gd = r.density.g_delta(grid)
        diff = SampledField(grid, gd.values - g.values)
        for p in p_list:
            gaps[str(p)].append(lp_norm(diff, p))
        sup.append((lp_norm_values(gd.values, grid.weights, math.inf),
                    lp_norm_values(g.values, grid.weights, math.inf)))
    mu = results[0].basis.mu
    sens = [v_norm(b.final - a.final, mu) for a, b in zip(results, results[1:])]
    out = {
        "delta_list": deltas,
        "singular": config.density.singular,
        "g_gap": gaps,
        "g_gap_monotone": {p: _decreasing(v, 0.01) for p, v in gaps.items()},
        "terminal_differences": sens,
        "decreasing": _decreasing(sens, 0.0),
        "status": [r.trajectory.status for r in results],
    }
    if not config.density.singular:
        out["sup_norms"] = sup
        out["sup_contraction"] = all(a <= b * (1 + 1e-8) for a, b in sup)
    return out


# -- twin runs ----------------------------------------------------------------

def _max_growth_rate(traj, tensors):
    """Largest V-symmetric rate of the linearized flow along the trajectory."""
    A = np.diag(1.0 + tensors.stiff_diag)
    best = -math.inf
    for c in traj.coeffs:
        J = jacobian(c, tensors)
        M = 0.5 * (A @ J + J.T @ A)
        best = max(best, float(linalg.eigh(M, A, eigvals_only=True)[-1]))
    return best


def twin(config, scales=None, threads=1, write=False, safety=1.1):
    """Base run versus seeded W-normalized perturbations of size s.

    Y(t) = ||phi_1 - phi_2||_V^2 is compared with s^2 and with an Osgood
    envelope whose rate lambda is fitted from the linearized flow: with
    sigma the largest V-symmetric rate along the base run,
    Y(t) <= Y(0) exp(2 sigma t) to first order, and lambda is chosen so the
    envelope grows at least that fast up to the linear bound.
    """
    ss = list(scales or config.scales)
    if any(s < 0 for s in ss) or any(b >= a for a, b in zip(ss, ss[1:])):
        raise ConfigError("scales must be non-negative and strictly descending")
    base = simulate(replace(config, out=str(Path(config.out) / "base")), write=write)
    basis = base.basis
    rng = np.random.default_rng(config.seed + 1)
    pert = rng.standard_normal(basis.n)
    pert /= w_norm(pert, basis.mu)
    c0 = base.trajectory.coeffs[0]

    def job(s):
        state = SpectralField(basis, c0 + s * pert)
        return simulate(replace(config, out=str(Path(config.out) / f"s{s:g}")), state, write)

    runs = _map(job, ss, threads)
    times = base.trajectory.times
    Ys = []
    for r in runs:
        diff = r.trajectory.coeffs - base.trajectory.coeffs[: r.trajectory.coeffs.shape[0]]
        Ys.append(np.sum((1.0 + basis.mu) * diff * diff, axis=1))
    theta = GrowthFunction.parse(config.growth)
    sigma = max(_max_growth_rate(base.trajectory, base.tensors), 0.0)
    t_end = float(times[-1])
    rows = []
    for s, Y in zip(ss, Ys):
        row = {"scale": s, "Y_end": float(Y[-1]), "ratio": float(Y[-1] / s**2) if s > 0 else 0.0}
        if s > 0:
            y0 = float(Y[0]) * safety
            y_top = y0 * math.exp(2.0 * sigma * safety * t_end)
            lam = 2.0 * sigma * safety / phi_theta(theta, 1.0 / y_top) if sigma > 0 else 0.0
            env = osgood_envelope(theta, lam, y0, t_end)
            bound = env.at(times[: Y.size])
            row.update(lam_fit=lam, below_envelope=bool(np.all(Y <= bound)),
                       envelope_end=float(bound[-1]),
                       envelope_margin=float(np.min(bound - Y)))
        rows.append(row)
    ratios = [r["ratio"] for r in rows if r["scale"] > 0]
    orders = [math.log(a["Y_end"] / b["Y_end"]) / math.log(a["scale"] / b["scale"])
              for a, b in zip(rows, rows[1:])
              if b["scale"] > 0 and a["Y_end"] > 0 and b["Y_end"] > 0]
    spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else math.inf
    return {
        "scales": ss,
        "growth": theta.label(),
        "sigma_max": sigma,
        "rows": rows,
        "ratio_spread": spread,
        "ratio_bounded": bool(spread <= 1.5),
        "orders": orders,
        "order_ok": all(o >= 1.0 for o in orders),
        "below_envelope": all(r.get("below_envelope", True) for r in rows),
        "times": times.tolist(),
        "Y": [y.tolist() for y in Ys],
        "status": [base.trajectory.status] + [r.trajectory.status for r in runs],
    }


# -- Calderon-Zygmund study ---------------------------------------------------

def w2p_norm(value, gradient, hessian, weights, p):
    """(||f||_p^p + || |grad f| ||_p^p + || |D^2 f|_F ||_p^p)^{1/p}."""
    parts = [value,
             np.sqrt(np.sum(gradient ** 2, axis=-1)),
             np.sqrt(np.sum(hessian ** 2, axis=(-2, -1)))]
    # each part is max-scaled inside lp_norm_values; recombine the p-th powers
    norms = [lp_norm_values(v, weights, p) for v in parts]
    top = max(norms)
    if top == 0:
        return 0.0
    return top * sum((x / top) ** p for x in norms) ** (1.0 / p)


def cz_ratio(c, basis, grid, p_list):
    """R(p) = ||phi||_{W^{2,p}} / (p ||phi - Delta phi||_p) for coefficients c."""
    bs = grid.basis_samples(basis, 2)
    w = grid.weights
    value = c @ bs.value
    grad = np.einsum("i,ipa->pa", c, bs.gradient)
    hess = np.einsum("i,ipab->pab", c, bs.hessian)
    vort = ((1.0 + basis.mu) * c) @ bs.value
    return np.array([w2p_norm(value, grad, hess, w, p) / (p * lp_norm_values(vort, w, p))
                     for p in p_list])


def cz_study(basis, grid, p_list=(2.0, 4.0, 8.0, 16.0, 32.0, 64.0), trials=20, seed=0, decay=1.0):
    """Max over random fields of R(p); the trend is max_{p < q} R(q)/R(p) - 1.

    Fields have independent normal coefficients damped by (1 + mu)^{-decay}.
    """
    ps = [float(p) for p in p_list]
    if any(p < 2 or p > 64 for p in ps):
        raise ConfigError("cz exponents must lie in [2, 64]")
    rng = np.random.default_rng(seed)
    R = np.empty((trials, len(ps)))
    for k in range(trials):
        c = rng.standard_normal(basis.n) * (1.0 + basis.mu) ** (-decay)
        R[k] = cz_ratio(c, basis, grid, ps)
    worst = R.max(axis=0)
    trend = max((worst[j] / worst[i] - 1.0 for i in range(len(ps)) for j in range(i + 1, len(ps))),
                default=0.0)
    return {
        "p_list": ps,
        "max_R": worst.tolist(),
        "constant": float(worst.max()),
        "trend": float(trend),
        "flat_or_decreasing": bool(trend <= 0.10),
    }


def basis_table(geometry, n):
    """CSV text of the canonical basis ordering."""
    basis = build_basis(geometry, n)
    lines = ["index,m_or_k,k_or_l,parity,mu,lambda,norm_const"]
    for i, m, k, par, mu, lam, nc in basis.table():
        lines.append(f"{i},{m},{k},{par},{mu!r},{lam!r},{nc!r}")
    return "\n".join(lines) + "\n"


def write_report(report, out, name="report.json"):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    return path / name


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


__all__ = ["RunConfig", "InitialCondition", "load_config", "config_help", "prepare", "simulate",
           "run", "converge_n", "eps_sweep", "delta_sweep", "twin", "cz_study", "cz_ratio",
           "basis_table", "write_report"]
