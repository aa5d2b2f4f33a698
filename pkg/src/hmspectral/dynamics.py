"""Time integration of the Galerkin system.

The state is the coefficient vector c of phi_n = sum c_i e_i.  Writing the
system as dc/dt = L c + N(c) with the diagonal L = -eps mu, the integrating
factor scheme (Lawson RK4) treats L exactly and N by classical RK4 stages:

    k1 = N(c)
    k2 = N(E_h (c + dt/2 k1))
    k3 = N(E_h c + dt/2 k2)
    k4 = N(E c + dt E_h k3)
    c' = E c + dt/6 (E k1 + 2 E_h (k2 + k3) + k4),   E = e^{L dt}, E_h = e^{L dt/2}.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, UsageError

SCHEMES = ("if_rk4", "rk4")
_MAGIC = b"HMS1"


class StabilityWarning(RuntimeWarning):
    """The time step exceeds the estimated explicit stability limit."""


@dataclass(frozen=True, eq=False)
class SpectralField:
    basis: object
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.n,):
            raise UsageError(f"expected {self.basis.n} coefficients, got shape {c.shape}")
        if not np.isfinite(c).all():
            raise NumericError("spectral field has non-finite coefficients")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, basis):
        return cls(basis, np.zeros(basis.n))

    @classmethod
    def single_mode(cls, basis, index, amplitude=1.0):
        c = np.zeros(basis.n)
        c[index] = amplitude
        return cls(basis, c)

    def vorticity_coeffs(self):
        """Coefficients of phi - Delta phi."""
        return (1.0 + self.basis.mu) * self.coeffs


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "if_rk4"
    dt: float = 1e-3
    t_end: float = 1.0
    sample_every: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise UsageError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0 or not self.t_end > 0:
            raise UsageError("dt and t_end must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise UsageError("dt must not exceed t_end")
        if self.sample_every < 1:
            raise UsageError("sample_every must be a positive integer")

    @property
    def steps(self):
        return max(1, int(round(self.t_end / self.dt)))


@dataclass
class Trajectory:
    times: np.ndarray
    coeffs: np.ndarray
    basis: object = field(repr=False)
    records: list = field(default_factory=list, repr=False)
    status: str = "ok"
    message: str = ""

    @property
    def final(self):
        return SpectralField(self.basis, self.coeffs[-1], float(self.times[-1]))

    def state(self, k):
        return SpectralField(self.basis, self.coeffs[k], float(self.times[k]))


def _forcing(tensors):
    mu = tensors.stiff_diag
    return -tensors.eps * mu * tensors.gamma / tensors.mass_diag


def nonlinear_rate(c, tensors):
    """N(c): the non-diagonal part of dc/dt."""
    return -tensors.nonlinear(c) / tensors.mass_diag + _forcing(tensors)


def rhs(state, tensors):
    """dc/dt for the Galerkin system at `state`."""
    c = state.coeffs if isinstance(state, SpectralField) else np.asarray(state, dtype=float)
    if c.shape != (tensors.n,):
        raise UsageError("state and tensors belong to different bases")
    if not np.isfinite(c).all():
        raise NumericError("non-finite state passed to rhs")
    return nonlinear_rate(c, tensors) - tensors.eps * tensors.stiff_diag * c


def jacobian(c, tensors):
    """Dense Jacobian of rhs with respect to c."""
    n = tensors.n
    i, j, l, v = tensors.i, tensors.j, tensors.l, tensors.value
    mu, gam = tensors.stiff_diag, tensors.gamma
    J = np.zeros((n, n))
    # d/dc_j of T_ijl c_j (gamma_l + mu_l c_l) and d/dc_l of the same term
    np.add.at(J, (i, j), v * (gam[l] + mu[l] * c[l]))
    np.add.at(J, (i, l), v * c[j] * mu[l])
    J = -J / tensors.mass_diag[:, None]
    J[np.diag_indices(n)] -= tensors.eps * mu
    return J


def stability_rate(c, tensors):
    """Row-sum bound on the linearized rate of the explicit part."""
    a = np.abs(tensors.value)
    w = a * (np.abs(tensors.gamma[tensors.l]) + tensors.stiff_diag[tensors.l] * np.abs(c[tensors.l]))
    w = w + a * np.abs(c[tensors.j]) * tensors.stiff_diag[tensors.l]
    rows = np.bincount(tensors.i, weights=w, minlength=tensors.n) / tensors.mass_diag
    return float(rows.max()) if rows.size else 0.0


def _step_if_rk4(c, dt, tensors, E, Eh):
    N = lambda x: nonlinear_rate(x, tensors)
    k1 = N(c)
    k2 = N(Eh * (c + 0.5 * dt * k1))
    k3 = N(Eh * c + 0.5 * dt * k2)
    k4 = N(E * c + dt * Eh * k3)
    return E * c + (dt / 6.0) * (E * k1 + 2.0 * Eh * (k2 + k3) + k4)


def _step_rk4(c, dt, tensors):
    lin = tensors.eps * tensors.stiff_diag
    f = lambda x: nonlinear_rate(x, tensors) - lin * x
    k1 = f(c)
    k2 = f(c + 0.5 * dt * k1)
    k3 = f(c + 0.5 * dt * k2)
    k4 = f(c + dt * k3)
    return c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(state0, tensors, config, monitor=None):
    """Integrate from state0 to config.t_end with a fixed step.

    Samples are taken every `sample_every` steps (plus the final time); when
    `monitor` is given, monitor.record(state) is stored for each sample.  A
    non-finite state stops the run with status "error" and keeps the last
    valid sample.
    """
    if state0.basis.n != tensors.n:
        raise UsageError("initial state and tensors belong to different bases")
    dt = config.dt
    steps = config.steps
    lin = -tensors.eps * tensors.stiff_diag
    E, Eh = np.exp(lin * dt), np.exp(0.5 * lin * dt)
    c = state0.coeffs.copy()
    t0 = state0.t
    rate = stability_rate(c, tensors)
    if config.scheme == "rk4":
        rate = max(rate, float(np.max(-lin, initial=0.0)))
    if rate * dt > 0.5:
        warnings.warn(f"dt={dt:g} exceeds the stability estimate 0.5/{rate:.3g}",
                      StabilityWarning, stacklevel=2)
    times, samples, records = [t0], [c.copy()], []
    if monitor is not None:
        records.append(monitor.record(SpectralField(state0.basis, c, t0)))
    status, message = "ok", ""
    for step in range(1, steps + 1):
        if config.scheme == "if_rk4":
            new = _step_if_rk4(c, dt, tensors, E, Eh)
        else:
            new = _step_rk4(c, dt, tensors)
        if not np.isfinite(new).all():
            status = "error"
            message = f"non-finite state at step {step} (t={t0 + step * dt:g})"
            break
        c = new
        if step % config.sample_every == 0 or step == steps:
            t = t0 + step * dt
            times.append(t)
            samples.append(c.copy())
            if monitor is not None:
                records.append(monitor.record(SpectralField(state0.basis, c, t)))
    return Trajectory(np.array(times), np.array(samples), state0.basis, records, status, message)


def write_snapshot(path, state):
    c = np.ascontiguousarray(state.coeffs, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<Id", c.size, float(state.t)) + c.tobytes())


def read_snapshot(path, basis):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise UsageError(f"{path}: not an HMS1 snapshot")
    n, t = struct.unpack_from("<Id", raw, 4)
    if n != basis.n:
        raise UsageError(f"{path}: snapshot has n={n}, basis has n={basis.n}")
    c = np.frombuffer(raw, dtype="<f8", count=n, offset=16).astype(float)
    return SpectralField(basis, c, t)

