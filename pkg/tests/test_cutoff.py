import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rabinowitz as rb
from rabinowitz.cutoff import (
    CutoffHamiltonian,
    CutoffProfile,
    F_eval,
    admissible_constants,
    bounds_mM,
    constant_C,
    ramp_sign_violation,
    thresholds,
)
from rabinowitz.errors import PositivityError
from rabinowitz.symplectization import ConePoint

SQRT2 = math.sqrt(2)
CIRCLE = rb.Circle()
TORUS = rb.FlatTorusUnitCotangent(2)


def test_bounds_of_constant():
    m, M = bounds_mM(rb.constant(CIRCLE, SQRT2))
    assert m == pytest.approx(0.99 * SQRT2) and m == pytest.approx(1.4000, abs=1e-4)
    assert M == pytest.approx(1.01 * SQRT2) and M == pytest.approx(1.4284, abs=1e-4)
    assert bounds_mM(rb.constant(CIRCLE, 1.0)) == pytest.approx((0.99, 1.01))


def test_bounds_of_time_dependent_path():
    spec = rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.5, k=[0.0], omega=1.0)
    m, M = bounds_mM(spec)
    assert m == pytest.approx(0.495, abs=1e-3)
    assert M == pytest.approx(1.515, abs=1e-3)


def test_bounds_reject_nonpositive_paths():
    with pytest.raises(PositivityError):
        bounds_mM(rb.constant(CIRCLE, -1.0))


def test_C_vanishes_for_rotations_and_reeb_flows():
    assert constant_C(rb.constant(CIRCLE, SQRT2), 0.0, 5.0) == 0.0
    assert constant_C(rb.constant(TORUS, 1.0), 0.0, 5.0, grid=(16, 8, 4)) == pytest.approx(0.0, abs=1e-12)


def test_C_regression_baseline():
    spec = rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.1, k=[1.0])
    C = constant_C(spec, 0.0, 3.0)
    assert C == pytest.approx(2.08389679535752, rel=1e-6)
    # bounded by the crude estimate eta_max * max|h'| / min rho
    assert C <= 3.0 * 0.2 * math.pi / (0.9 / 1.1)


def test_admissible_constants_for_rotation():
    wc = admissible_constants(rb.constant(CIRCLE, SQRT2), 0.0, 5.0)
    assert wc.C == 0.0
    assert wc.kappa0 == pytest.approx(1.05 * 3 * 1.01 * SQRT2)
    assert wc.kappa0 == pytest.approx(4.50, abs=5e-3)
    assert wc.R0 == pytest.approx(1.05 * (1 / (0.99 * SQRT2) + 1))
    assert wc.R0 == pytest.approx(1.80, abs=5e-3)


def test_small_M_hits_the_unit_branch():
    kappa0, _ = thresholds(0.2, 0.3, 0.0)
    assert kappa0 == pytest.approx(1.05)


@settings(max_examples=30, deadline=None)
@given(m=st.floats(0.01, 10), ratio=st.floats(1.0, 5.0), C=st.floats(0.0, 5.0))
def test_threshold_invariants(m, ratio, C):
    M = m * ratio
    kappa0, R0 = thresholds(m, M, C)
    assert kappa0 > max(1.0, 3 * M * math.exp(C)) and kappa0 > 2 * M
    assert R0 > max(math.exp(C) / m + 1, 1 / M) and R0 * m > 1


PROFILE = CutoffProfile(kappa=10.0, R=5.0, m=1.4, M=1.43)


def test_F_eval_examples():
    spec = rb.constant(CIRCLE, SQRT2)
    assert F_eval(PROFILE, spec, 0.0, ConePoint([0.2], 3.0)) == pytest.approx(3 * SQRT2 - 10)
    assert F_eval(PROFILE, spec, 0.0, ConePoint([0.2], 3.0)) == pytest.approx(-5.757, abs=1e-3)
    assert F_eval(PROFILE, spec, 0.0, ConePoint([0.2], 0.5)) == pytest.approx(-9.3)
    assert PROFILE.beta(1.5) == pytest.approx(0.5)
    assert F_eval(PROFILE, spec, 0.0, ConePoint([0.2], 1.5)) == pytest.approx(1.5 * (0.5 * SQRT2 + 0.7) - 10)
    assert F_eval(PROFILE, spec, 0.0, ConePoint([0.2], 1.5)) == pytest.approx(-7.889, abs=1e-3)


def test_profile_validation():
    with pytest.raises(ValueError):
        CutoffProfile(kappa=1.0, R=5.0, m=1.0, M=2.0)
    with pytest.raises(ValueError):
        CutoffProfile(kappa=3.0, R=5.0, m=2.0, M=1.0)
    with pytest.raises(ValueError):
        CutoffProfile(kappa=1.2, R=1.1, m=1.0, M=2.0)


def test_beta_shape_and_slope():
    r = np.linspace(0, PROFILE.top + 3, 20001)
    b = PROFILE.beta(r)
    assert np.all((b >= 0) & (b <= 1))
    assert np.all(b[r <= 1] == 0) and np.all(b[(r >= 2) & (r <= PROFILE.top)] == 1) and np.all(b[r >= PROFILE.top + 1] == 0)
    h = 1e-6
    inner = r[(np.abs(r - 1) > 1e-3) & (np.abs(r - 2) > 1e-3)]
    fd = (PROFILE.beta(inner + h) - PROFILE.beta(inner - h)) / (2 * h)
    np.testing.assert_allclose(PROFILE.dbeta(inner), fd, atol=1e-6)


def test_continuity_across_plateau_edges():
    spec = rb.sinusoidal(CIRCLE, offset=1.415, amplitude=0.01, k=[1.0])
    F = CutoffHamiltonian(PROFILE, spec)
    x = CIRCLE.seed_points(16)
    for edge in (2.0, PROFILE.top):
        lo = F.value(x, edge - 1e-9, 0.0)
        hi = F.value(x, edge + 1e-9, 0.0)
        np.testing.assert_allclose(lo, hi, atol=1e-7)


def test_plateau_is_exact_lift():
    spec = rb.sinusoidal(CIRCLE, offset=1.415, amplitude=0.01, k=[1.0])
    F = CutoffHamiltonian(PROFILE, spec)
    x = CIRCLE.seed_points(16)
    r = np.linspace(2.0, PROFILE.top, 16)
    np.testing.assert_array_equal(F.value(x, r, 0.2) + PROFILE.kappa, r * spec.value(x, 0.2))


@pytest.mark.parametrize("spec", [
    rb.constant(CIRCLE, SQRT2),
    rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.1, k=[1.0]),
    rb.sinusoidal(CIRCLE, offset=1.0, amplitude=0.5, k=[0.0], omega=1.0),
])
def test_ramp_sign_for_constructed_profiles(spec):
    wc = admissible_constants(spec, 0.0, 2.0, C_grid=(16, 16, 4))
    prof = wc.profile(1.05 * wc.kappa0, 1.05 * wc.R0)
    radii = np.r_[np.linspace(1.0, 2.0, 101), np.linspace(prof.top, prof.top + 1, 101)]
    assert ramp_sign_violation(prof, spec, CIRCLE.seed_points(64), np.linspace(0, 1, 17), radii) == 0.0


def test_ramp_sign_detects_a_bad_profile():
    # hbar above h on the inner ramp flips the sign
    bad = CutoffProfile(kappa=10.0, R=5.0, m=2.0, M=2.0)
    radii = np.linspace(1.0, 2.0, 11)
    assert ramp_sign_violation(bad, rb.constant(CIRCLE, 1.0), CIRCLE.seed_points(4), [0.0], radii) < 0
