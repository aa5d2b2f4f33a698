import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmspectral.basis import Geometry, build_basis
from hmspectral.dynamics import SpectralField
from hmspectral.errors import DomainError, UsageError
from hmspectral.quadrature import SampledField, lp_norm, make_grid, project, synthesize
from hmspectral.density import (DensitySpec, build_density, contraction_report,
                                regularize_density, sample_log_density, smooth_initial_field,
                                truncate_regularize)

DELTAS = (1e-1, 1e-2, 1e-3, 1e-4)


@pytest.fixture(scope="module")
def disk64():
    geo = Geometry.disk()
    b = build_basis(geo, 64)
    return b, make_grid(geo, b)


def test_constant_profile_is_zero(disk64):
    _, g = disk64
    f = sample_log_density(DensitySpec("constant", c=1.0), g)
    assert np.all(f.values == 0.0)


def test_power_law_profile(disk64):
    _, g = disk64
    f = sample_log_density(DensitySpec(alpha=1.0), g)
    r2 = np.sum(g.points ** 2, axis=1)
    inner = r2 < 0.9
    np.testing.assert_allclose(f.values[inner], np.log1p(-r2[inner]), rtol=1e-12, atol=1e-15)
    assert np.isfinite(f.values).all()


def test_power_law_scaling(disk64):
    _, g = disk64
    one = sample_log_density(DensitySpec(alpha=1.0), g)
    two = sample_log_density(DensitySpec(alpha=2.0), g)
    for p in (1, 2, 4, 8):
        assert lp_norm(two, p) == pytest.approx(2 * lp_norm(one, p), rel=1e-13)


def test_invalid_specs():
    with pytest.raises(DomainError):
        DensitySpec(eta=-1.0)
    with pytest.raises(DomainError):
        DensitySpec("power_law", alpha=0.0)
    with pytest.raises(DomainError):
        DensitySpec("lognormal")


def test_singular_needs_delta(disk64):
    b, g = disk64
    with pytest.raises(UsageError):
        build_density(DensitySpec(alpha=1.0), b, g, 0.0)
    with pytest.raises(UsageError):
        regularize_density(sample_log_density(DensitySpec(), g), b, 0.0)


def test_regularize_single_mode(disk64):
    b, g = disk64
    f = SampledField(g, g.basis_samples(b, 0).value[0])
    d = regularize_density(f, b, 0.05)
    expected = np.zeros(b.n)
    expected[0] = 1.0 / (1.0 + 0.05 * b.mu[0])
    np.testing.assert_allclose(d.gamma, expected, atol=1e-12)


@pytest.mark.parametrize("delta", DELTAS)
def test_lp_contraction_singular(disk64, delta):
    b, g = disk64
    f = sample_log_density(DensitySpec(alpha=1.0), g)
    d = regularize_density(f, b, delta)
    for p, (gd, gn) in contraction_report(d, (1.5, 2.0, 4.0, 8.0)).items():
        assert gd <= gn * (1 + 1e-8), (p, gd, gn)


BOUNDED = [DensitySpec(alpha=1.0, eta=1.0), DensitySpec(alpha=2.0, eta=1.0),
           DensitySpec("gaussian", sigma=0.5, eta=0.1), DensitySpec(alpha=1.0, eta=0.1)]


@pytest.mark.parametrize("spec", BOUNDED, ids=lambda s: f"{s.profile}-{s.alpha}-{s.eta}")
@pytest.mark.parametrize("kind", ["disk", "square"])
def test_resolvent_max_principle(kind, spec):
    """The diagonal solve never raises the node max of its spectral input P_n g."""
    geo = Geometry(kind)
    b = build_basis(geo, 64)
    g = make_grid(geo, b)
    f = sample_log_density(spec, g)
    data = np.abs(synthesize(g, b, project(f, b)).values).max()
    for delta in DELTAS:
        out = np.abs(regularize_density(f, b, delta).g_delta(g).values).max()
        assert out <= data * (1 + 1e-8)


@pytest.mark.parametrize("delta", DELTAS)
def test_max_principle_bounded(disk64, delta):
    b, g = disk64
    f = sample_log_density(DensitySpec(alpha=2.0, eta=1.0), g)
    d = regularize_density(f, b, delta)
    rep = contraction_report(d, (1.5, 2.0, 4.0, 8.0, math.inf))
    for p, (gd, gn) in rep.items():
        assert gd <= gn * (1 + 1e-8), (p, gd, gn)


def test_truncation_overshoot_decays_with_n():
    # log(2 - r^2): the truncated expansion misses the center value by about
    # 1% at n = 64 (over- or undershooting with n); the error shrinks with n
    geo = Geometry.disk()
    excess = []
    for n in (32, 64, 128):
        b = build_basis(geo, n)
        g = make_grid(geo, b)
        f = sample_log_density(DensitySpec(alpha=1.0, eta=1.0), g)
        gd = regularize_density(f, b, 1e-4).g_delta(g)
        excess.append(np.abs(gd.values).max() / np.abs(f.values).max() - 1.0)
    size = np.abs(excess)
    assert size[0] > size[1] > size[2]
    assert size[2] < 0.006


def test_truncation_inactive_for_bounded(disk64):
    b, g = disk64
    f = sample_log_density(DensitySpec(alpha=1.0, eta=1.0), g)
    a = regularize_density(f, b, 0.1)
    t = truncate_regularize(f, b, 0.1)
    np.testing.assert_array_equal(a.gamma, t.gamma)
    assert t.truncation_k == 10.0


def test_truncation_clips_before_solve(disk64):
    b, g = disk64
    f = sample_log_density(DensitySpec(alpha=1.0), g)
    assert f.values.min() < -10
    t = truncate_regularize(f, b, 0.1)
    manual = regularize_density(SampledField(g, np.maximum(f.values, -10.0)), b, 0.1)
    np.testing.assert_array_equal(t.gamma, manual.gamma)
    gd, gn = contraction_report(t, (1.5,))[1.5]
    assert gd <= gn


def test_delta_convergence_monotone_square():
    geo = Geometry.square()
    b = build_basis(geo, 256)
    g = make_grid(geo, b)
    f = sample_log_density(DensitySpec(alpha=1.0), g)
    gaps = []
    for delta in DELTAS:
        gd = regularize_density(f, b, delta).g_delta(g)
        gaps.append([lp_norm(SampledField(g, gd.values - f.values), p) for p in (2, 4, 8)])
    gaps = np.array(gaps)
    assert np.all(gaps[1:] <= gaps[:-1] * 1.01)


def test_singularity_class_linear_in_p(disk64):
    _, g = disk64
    for alpha in (1.0, 2.0):
        f = sample_log_density(DensitySpec(alpha=alpha), g)
        ratios = [lp_norm(f, p) / (p * alpha) for p in (4, 8, 16, 32)]
        assert max(ratios) / min(ratios) <= 2.0


def test_clip_guard(disk64):
    _, g = disk64
    f = sample_log_density(DensitySpec(alpha=100.0), g)
    assert f.values.min() >= -700.0


def test_smooth_initial_field(disk64, rng):
    b, g = disk64
    c = np.zeros(b.n)
    c[0] = 1.0
    s = smooth_initial_field(SpectralField(b, c), 1.0)
    assert s.coeffs[0] == pytest.approx(1.0 / (1.0 + b.mu[0]), rel=1e-15)
    phi = SpectralField(b, rng.standard_normal(b.n))
    assert np.array_equal(smooth_initial_field(phi, 0.0).coeffs, phi.coeffs)
    for eps in (1e-3, 1e-1, 1.0):
        sm = smooth_initial_field(phi, eps)
        a = (1 + b.mu) * sm.coeffs
        z = (1 + b.mu) * phi.coeffs
        assert np.linalg.norm(a) <= np.linalg.norm(z)
        # L^inf contraction of (I - Delta) phi, monitored on the grid
        assert (lp_norm(synthesize(g, b, a), math.inf)
                <= lp_norm(synthesize(g, b, z), math.inf) * (1 + 1e-10))


@given(st.lists(st.floats(-3, 3), min_size=16, max_size=16), st.floats(1e-4, 1.0))
def test_l2_contraction_property(coeffs, delta):
    geo = Geometry.disk()
    b = build_basis(geo, 16)
    g = make_grid(geo, b)
    f = synthesize(g, b, np.array(coeffs))
    d = regularize_density(f, b, delta)
    assert lp_norm(d.g_delta(g), 2) <= lp_norm(f, 2) * (1 + 1e-12) + 1e-300
