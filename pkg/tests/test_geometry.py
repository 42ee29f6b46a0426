import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rabinowitz as rb
from rabinowitz.errors import DomainError, UnsupportedModelError
from rabinowitz.geometry import IsotopySpec, contact_condition, flow_batch

SQRT2 = math.sqrt(2)
CIRCLE = rb.Circle()
TORUS = rb.FlatTorusUnitCotangent(2)
ELLIPSOID = rb.EllipsoidBoundary([1.0, 1.5])


def circle_wave():
    return rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.5, k=[1.0])


def test_circle_rotation_field():
    Y = rb.contact_vector_field(CIRCLE, rb.constant(CIRCLE, SQRT2), 0.0, np.array([0.37]))
    assert Y == pytest.approx([SQRT2])


def test_circle_field_is_h_times_reeb():
    Y = rb.contact_vector_field(CIRCLE, circle_wave(), 0.0, np.array([0.0]))
    assert float(CIRCLE.alpha(np.array([[0.0]]))[0] @ Y) == pytest.approx(1.0)


def test_torus_reeb_field_is_geodesic_spray():
    x = np.array([0.0, 0.0, 1.0, 0.0])
    Y = rb.contact_vector_field(TORUS, rb.constant(TORUS, 1.0), 0.0, x)
    assert float(TORUS.alpha(x[None])[0] @ Y) == pytest.approx(1.0)
    np.testing.assert_allclose(Y, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("model", [CIRCLE, TORUS, ELLIPSOID])
def test_reeb_field_normalized_and_in_kernel_of_dalpha(model):
    x = model.sample(np.random.default_rng(1), 20)
    R = model.reeb(x)
    np.testing.assert_allclose(np.einsum("ba,ba->b", model.alpha(x), R), 1.0, atol=1e-12)
    E = model.tangent_basis(x)
    kernel = np.einsum("ba,bac,bck->bk", R, model.dalpha(x), E)
    np.testing.assert_allclose(kernel, 0.0, atol=1e-12)


@pytest.mark.parametrize("model", [CIRCLE, TORUS, ELLIPSOID])
def test_contact_condition_nonvanishing(model):
    vol, a_err, d_err = contact_condition(model, model.sample(np.random.default_rng(2), 10))
    assert np.all(np.asarray(vol) > 1e-8)
    assert np.max(a_err) < 1e-10 and np.max(d_err) < 1e-10


def test_circle_rotation_flow():
    res = rb.flow(CIRCLE, rb.constant(CIRCLE, SQRT2), np.array([0.25]), 0.5)
    assert res.x_end[0] == pytest.approx((0.25 + 0.5 * SQRT2) % 1.0, abs=1e-10)
    assert res.x_end[0] == pytest.approx(0.95711, abs=1e-5)
    assert res.rho == 1.0


@pytest.mark.parametrize("model", [CIRCLE, TORUS, ELLIPSOID])
def test_time_zero_is_identity(model):
    x = model.sample(np.random.default_rng(3), 1)[0]
    res = rb.flow(model, rb.constant(model, 1.3), x, 0.0)
    np.testing.assert_allclose(res.x_end, x, atol=1e-15)
    assert res.rho == 1.0


def test_torus_geodesic_flow_is_straight_line():
    res = rb.flow(TORUS, rb.constant(TORUS, 1.0), np.array([0.0, 0.0, 1.0, 0.0]), 0.3)
    np.testing.assert_allclose(res.x_end, [0.3, 0.0, 1.0, 0.0], atol=1e-10)
    assert res.rho == pytest.approx(1.0, abs=1e-12)


def test_flow_trajectory_samples():
    res = rb.flow(CIRCLE, rb.constant(CIRCLE, 1.0), np.array([0.1]), 0.5, trajectory=True, n_samples=11)
    assert res.trajectory.shape == (11, 2)
    np.testing.assert_allclose(res.trajectory[:, 0], (0.1 + 0.05 * np.arange(11)) % 1.0, atol=1e-10)


def test_flow_rejects_points_off_the_manifold():
    with pytest.raises(DomainError):
        rb.flow(TORUS, rb.constant(TORUS, 1.0), np.array([0.0, 0.0, 2.0, 0.0]), 0.1)


def test_validate_constant_path():
    rep = rb.validate_path(CIRCLE, rb.constant(CIRCLE, SQRT2))
    assert rep.positive and rep.twisted_periodic


def test_validate_negative_path():
    rep = rb.validate_path(CIRCLE, rb.constant(CIRCLE, -1.0))
    assert not rep.positive


def test_validate_time_periodic_path():
    spec = rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.5, k=[0.0], omega=1.0)
    rep = rb.validate_path(CIRCLE, spec)
    assert rep.positive and rep.twisted_periodic and rep.max_violation < 1e-6


def test_validate_detects_non_periodic_time_dependence():
    spec = rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.3, k=[1.0], omega=0.37)
    assert not rb.validate_path(CIRCLE, spec).twisted_periodic


def test_sinusoidal_requires_integral_wave_numbers_on_periodic_coordinates():
    with pytest.raises(ValueError):
        rb.sinusoidal(CIRCLE, k=[0.5])


def test_kinetic_energy_needs_torus():
    with pytest.raises(UnsupportedModelError):
        rb.kinetic_energy(CIRCLE)


def test_missing_derivatives_fall_back_to_differences():
    spec = IsotopySpec(CIRCLE, h=lambda x, t: 1.0 + 0.2 * np.sin(2 * np.pi * x[:, 0]))
    x = np.array([[0.1]])
    with pytest.warns(UserWarning):
        g = spec.grad(x, 0.0)
    assert g[0, 0] == pytest.approx(0.4 * np.pi * np.cos(0.2 * np.pi), rel=1e-7)


@settings(max_examples=15, deadline=None)
@given(x=st.floats(0.0, 1.0, exclude_max=True), s=st.floats(0.05, 1.0), t=st.floats(0.05, 1.0))
def test_composition_and_cocycle_autonomous(x, s, t):
    spec = circle_wave()
    x0 = np.array([x])
    a = rb.flow(CIRCLE, spec, x0, t)
    b = rb.flow(CIRCLE, spec, a.x_end, s)
    ab = rb.flow(CIRCLE, spec, x0, s + t)
    assert float(CIRCLE.distance(ab.x_end, b.x_end)) < 1e-6
    assert ab.rho == pytest.approx(b.rho * a.rho, abs=1e-6)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.floats(0.1, 1.5), t=st.floats(0.1, 1.5))
def test_cocycle_on_ellipsoid(seed, s, t):
    spec = rb.sinusoidal(ELLIPSOID, offset=1.5, amplitude=0.3, k=[0.4, 0.0, 0.0, 0.2])
    x0 = ELLIPSOID.sample(np.random.default_rng(seed), 1)[0]
    a = rb.flow(ELLIPSOID, spec, x0, t)
    b = rb.flow(ELLIPSOID, spec, a.x_end, s)
    ab = rb.flow(ELLIPSOID, spec, x0, s + t)
    assert float(ELLIPSOID.distance(ab.x_end, b.x_end)) < 1e-6
    assert ab.rho == pytest.approx(b.rho * a.rho, abs=1e-6)


@pytest.mark.parametrize("m", [2, 3, 5])
def test_twisted_periodicity_powers(m):
    spec = rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.3, k=[1.0], omega=1.0)
    x = CIRCLE.seed_points(8)
    direct, rho_direct, _, _ = flow_batch(CIRCLE, spec, x, float(m), tol=1e-12)
    y, rho = x, np.ones(len(x))
    for _ in range(m):
        y, r1, _, _ = flow_batch(CIRCLE, spec, y, 1.0, tol=1e-12)
        rho = rho * r1
    assert np.max(CIRCLE.distance(direct, y)) < 1e-6
    np.testing.assert_allclose(rho_direct, rho, rtol=1e-6)


def test_time_only_hamiltonian_preserves_dx_on_circle():
    spec = rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.5, k=[0.0], omega=1.0)
    _, rho, _, _ = flow_batch(CIRCLE, spec, CIRCLE.seed_points(16), 0.77)
    np.testing.assert_allclose(rho, 1.0, atol=1e-12)


def test_flow_with_start_time_matches_shifted_composition():
    # phi_{t+1} = phi_t o phi_1 for a 1-periodic Hamiltonian
    spec = rb.sinusoidal(TORUS, offset=1.5, amplitude=0.3, k=[1.0, 0.0, 0.5, 0.0], omega=1.0)
    x = TORUS.sample(np.random.default_rng(5), 6)
    one, _, _, _ = flow_batch(TORUS, spec, x, 1.0)
    composed, _, _, _ = flow_batch(TORUS, spec, one, 0.4, t0=1.0)
    plain, _, _, _ = flow_batch(TORUS, spec, one, 0.4)
    direct, _, _, _ = flow_batch(TORUS, spec, x, 1.4)
    assert np.max(TORUS.distance(direct, composed)) < 1e-8
    assert np.max(TORUS.distance(composed, plain)) < 1e-8
