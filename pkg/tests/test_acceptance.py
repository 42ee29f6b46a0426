"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``; the summary
lines are also repeated at the end of every pytest session.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

import rabinowitz as rb
from conftest import record
from rabinowitz.action import Loop, action, directional_derivative, refine_newton, seed_loop
from rabinowitz.cutoff import CutoffHamiltonian, CutoffProfile, admissible_constants
from rabinowitz.discriminant import CircleDiffeo, components_of, conjugate_points, conjugate_spec, match_sets
from rabinowitz.spectrum import circle_oracle, growth_rate, mu_proxy, spectrum
from rabinowitz.symplectization import liouville_defect, pullback_residual

SQRT2 = math.sqrt(2)


@lru_cache(maxsize=None)
def circle_sqrt2():
    spec = rb.constant(rb.Circle(), SQRT2)
    return spec, rb.find_discriminant(spec, (0.0, 5.0))


@lru_cache(maxsize=None)
def circle_constants():
    spec, _ = circle_sqrt2()
    return admissible_constants(spec, 0.0, 5.0)


def refine_components(spec, points, profile, nodes=128):
    """Refined critical loop of the cut-off action for every component."""
    F = CutoffHamiltonian(profile, spec)
    out = []
    for comp in components_of(points):
        x0 = comp.representative
        r0 = profile.kappa / float(spec.value(x0[None], comp.eta)[0])
        loop, ok = refine_newton(seed_loop(F, x0, r0, comp.eta, N=nodes), profile, spec)
        out.append((comp, loop, ok))
    return out


@lru_cache(maxsize=None)
def circle_refined(kappa_factor=1.05, R_factor=1.05):
    spec, pts = circle_sqrt2()
    wc = circle_constants()
    prof = wc.profile(kappa_factor * wc.kappa0, R_factor * wc.R0)
    return prof, refine_components(spec, pts, prof)


def test_criterion_01_circle_oracle():
    start = time.perf_counter()
    spec, pts = circle_sqrt2()
    comps = components_of(pts)
    elapsed = time.perf_counter() - start
    orc = circle_oracle(SQRT2, 0.0, 5.0)
    expected = np.arange(1, 8) / SQRT2
    etas = np.array(sorted(c.eta for c in comps))
    err = float(np.max(np.abs(etas - expected))) if len(etas) == len(expected) else np.inf
    circles = all(c.morse_bott_dim == 1 for c in comps)
    passed = len(comps) == 7 and err <= 1e-8 and circles and orc.bruteforce_count == 7 and elapsed <= 30
    record(1, "circle oracle", passed,
           f"{len(comps)} components, max |eta - k/sqrt2| = {err:.2e}, closed form {orc.paper_formula_value} "
           f"({orc.note or 'agrees'}), {elapsed:.1f} s")
    assert orc.paper_formula_value == 6 and orc.note
    assert passed


def test_criterion_02_lift_preserves_liouville_form():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = {}
    circle = rb.Circle()
    torus = rb.FlatTorusUnitCotangent(2)
    specs = {
        "circle": rb.sinusoidal(circle, offset=1.0, amplitude=0.3, k=[1.0], omega=1.0),
        "flat-torus": rb.sinusoidal(torus, offset=1.5, amplitude=0.3, k=[1.0, 0.0, 0.5, 0.0], omega=1.0),
    }
    for name, spec in specs.items():
        model = spec.model
        n = 1000
        x = model.sample(rng, n)
        r = rng.uniform(0.5, 5.0, n)
        t = rng.uniform(0.0, 1.0, n)
        worst[name] = float(np.max(pullback_residual(spec, t, x, r, reduce=False)))
    elapsed = time.perf_counter() - start
    passed = max(worst.values()) <= 1e-6 and elapsed <= 60
    record(2, "lift preserves r alpha", passed,
           ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + f" over 1000 samples each, {elapsed:.1f} s")
    assert passed


def test_criterion_03_liouville_identity_on_cutoff():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    circle = rb.Circle()
    # an autonomous path keeps C and hence R kappa moderate, so absolute
    # tolerances stay above float resolution on the outer ramp
    spec = rb.sinusoidal(circle, offset=1.0, amplitude=0.1, k=[1.0])
    wc = admissible_constants(spec, 0.0, 5.0)
    prof = wc.profile(1.05 * wc.kappa0, 1.05 * wc.R0)
    F = CutoffHamiltonian(prof, spec)
    n = 1000
    x = circle.sample(rng, n)
    t = rng.uniform(0.0, 1.0, n)
    # a third of the samples on each ramp, the rest on the plateau
    r = np.concatenate([
        rng.uniform(1.0, 2.0, n // 3),
        rng.uniform(prof.top, prof.top + 1.0, n // 3),
        rng.uniform(2.0, prof.top, n - 2 * (n // 3)),
    ])
    defect = liouville_defect(F, x, r, t)
    plateau = (r >= 2.0) & (r <= prof.top)
    ramp = ~plateau
    plateau_err = float(np.max(np.abs(defect[plateau])))
    ramp_term = F.ramp_term(x, r, t)
    ramp_err = float(np.max(np.abs(defect[ramp] - ramp_term[ramp])))
    ramp_min = float(np.min(defect[ramp]))
    elapsed = time.perf_counter() - start
    passed = plateau_err <= 1e-6 and ramp_err <= 1e-6 and ramp_min >= -1e-10 and elapsed <= 30
    record(3, "Liouville identity of the cutoff", passed,
           f"plateau {plateau_err:.2e}, ramp vs r^2 beta'(h - hbar) {ramp_err:.2e}, min ramp residual {ramp_min:.2e}, "
           f"{elapsed:.1f} s")
    assert passed


def _critical_value_errors():
    rows = []
    prof, loops = circle_refined()
    rows += [("circle sqrt2", comp, loop, ok) for comp, loop, ok in loops]
    circle = rb.Circle()
    spec = rb.sinusoidal(circle, offset=1.0, amplitude=0.1, k=[1.0])
    pts = rb.find_discriminant(spec, (0.0, 3.0), seeds_per_unit=8)
    wc = admissible_constants(spec, 0.0, 3.0)
    prof2 = wc.profile(1.05 * wc.kappa0, 1.05 * wc.R0)
    rows += [("circle 1+0.1 sin", comp, loop, ok) for comp, loop, ok in refine_components(spec, pts, prof2)]
    return rows


def test_criterion_04_critical_value_law():
    rows = _critical_value_errors()
    law = max(abs(loop.meta["action"] - loop.eta) for _, _, loop, _ in rows)
    lower = min(abs(loop.meta["action"]) - abs(loop.eta) for _, _, loop, _ in rows)
    converged = all(ok for *_, ok in rows)
    passed = converged and law <= 1e-6 and lower >= -1e-9
    record(4, "critical values equal the action", passed,
           f"{len(rows)} refined points, max |A - eta| = {law:.2e}, min |A| - |eta| = {lower:.2e}")
    assert passed


def test_criterion_05_localization():
    prof, loops = circle_refined()
    r_min = min(loop.r.min() for _, loop, _ in loops)
    r_max = max(loop.r.max() for _, loop, _ in loops)
    passed = all(ok for *_, ok in loops) and r_min > 2.0 and r_max < prof.top
    record(5, "critical loops stay on the plateau", passed,
           f"r in [{r_min:.4f}, {r_max:.4f}] inside (2, {prof.top:.4f}) for {len(loops)} loops")
    assert passed


def test_criterion_06_profile_independence():
    _, a = circle_refined(1.05, 1.05)
    _, b = circle_refined(1.6, 1.4)
    d_eta = max(abs(la.eta - lb.eta) for (_, la, _), (_, lb, _) in zip(a, b))
    d_act = max(abs(la.meta["action"] - lb.meta["action"]) for (_, la, _), (_, lb, _) in zip(a, b))
    passed = len(a) == len(b) == 7 and d_eta <= 1e-6 and d_act <= 1e-6
    record(6, "independence of kappa and R", passed,
           f"max eta difference {d_eta:.2e}, max action difference {d_act:.2e} over {len(a)} components")
    assert passed


def _random_loop(model, rng, prof, N=48):
    t = np.arange(N) / N
    if isinstance(model, rb.Circle):
        q = rng.random() + rng.integers(-2, 3) * t + 0.05 * np.sin(2 * np.pi * t + rng.random() * 6)
        r = rng.uniform(1.3, prof.top + 0.7) + 0.2 * np.sin(2 * np.pi * (t + rng.random()))
        z = np.column_stack([q, r])
    elif isinstance(model, rb.FlatTorusUnitCotangent):
        q = rng.random(2) + np.outer(t, rng.integers(-1, 2, 2)) + 0.05 * np.sin(2 * np.pi * t)[:, None]
        ang = rng.random() * 2 * np.pi + 2 * np.pi * rng.integers(0, 2) * t
        r = rng.uniform(1.3, prof.top + 0.7) + 0.2 * np.cos(2 * np.pi * t)
        z = np.column_stack([q, r[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])])
    else:
        x0 = model.sample(rng, 1)[0]
        v = rng.standard_normal(len(x0))
        pts = model.normalize(x0 + 0.3 * np.outer(np.sin(2 * np.pi * t), v))
        r = rng.uniform(1.3, prof.top + 0.7) + 0.2 * np.cos(2 * np.pi * t)
        z = model.to_canonical(pts, r)
    return Loop(model, z, rng.uniform(0.5, 4.0))


def test_criterion_07_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    models = {
        "circle": rb.sinusoidal(rb.Circle(), offset=1.0, amplitude=0.3, k=[1.0], omega=1.0),
        "flat-torus": rb.sinusoidal(rb.FlatTorusUnitCotangent(2), offset=1.5, amplitude=0.3, k=[1.0, 0.0, 0.5, 0.0],
                                    omega=1.0),
        "ellipsoid": rb.sinusoidal(rb.EllipsoidBoundary([1.0, 1.3]), offset=1.5, amplitude=0.2, k=[0.5, 0.0, 0.0, 0.3],
                                   omega=1.0),
    }
    worst = {}
    h = 1e-5
    for name, spec in models.items():
        prof = CutoffProfile(kappa=3.0, R=2.0, m=0.5, M=2.0)
        F = CutoffHamiltonian(prof, spec)
        errs = []
        for _ in range(10):
            loop = _random_loop(spec.model, rng, prof)
            for _ in range(10):
                xi = rng.standard_normal(loop.z.shape)
                l = rng.standard_normal()
                exact = directional_derivative(loop, F, None, xi, l)
                plus = action(loop.copy(z=loop.z + h * xi, eta=loop.eta + h * l), F)
                minus = action(loop.copy(z=loop.z - h * xi, eta=loop.eta - h * l), F)
                fd = (plus - minus) / (2 * h)
                errs.append(abs(fd - exact) / max(abs(exact), 1e-12))
        worst[name] = max(errs)
    passed = max(worst.values()) <= 1e-5
    record(7, "gradient vs central differences", passed,
           ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (max relative error, 100 directions each)")
    assert passed


def test_criterion_08_conjugation_equivariance():
    circle = rb.Circle()
    spec = rb.sinusoidal(circle, offset=1.0, amplitude=0.1, k=[1.0])
    psi = CircleDiffeo.sine(0.1)
    conj = conjugate_spec(spec, psi)
    # two critical levels; the conjugated field is stiff, so the eta grid is coarser
    window = (0.0, 2.5)
    pts = rb.find_discriminant(spec, window, seeds_per_unit=8)
    conj_pts = rb.find_discriminant(conj, window, seeds_per_unit=4)
    # every mapped point is a discriminant point of the conjugated path
    mapped = conjugate_points(spec, psi, pts)
    eta_err, x_err, unmatched = match_sets(circle, pts, mapped, psi)
    # the independent searches see the same critical levels
    levels_a = sorted(c.eta for c in components_of(pts))
    levels_b = sorted(c.eta for c in components_of(conj_pts))
    level_err = max(abs(a - b) for a, b in zip(levels_a, levels_b)) if len(levels_a) == len(levels_b) else np.inf
    passed = unmatched == 0 and eta_err <= 1e-6 and x_err <= 1e-5 and level_err <= 1e-6 and len(pts) > 0
    record(8, "conjugation equivariance", passed,
           f"{len(pts)} points, eta error {eta_err:.2e}, x error {x_err:.2e}, unmatched {unmatched}, "
           f"{len(levels_a)} vs {len(levels_b)} levels differing by {level_err:.2e}")
    assert passed


def lattice_chord_lengths(q0, q1, m):
    d = np.subtract(q1, q0)
    R = int(math.ceil(m)) + 2
    out = []
    for i in range(-R, R + 1):
        for j in range(-R, R + 1):
            L = math.hypot(d[0] + i, d[1] + j)
            if 0 < L <= m:
                out.append(L)
    return sorted(out)


def test_criterion_09_legendrian_chords():
    start = time.perf_counter()
    spec = rb.constant(rb.FlatTorusUnitCotangent(2), 1.0)
    chords = rb.find_chords(spec, (0.0, 0.0), (0.5, 0.0), (0.0, 3.0))
    elapsed = time.perf_counter() - start
    found = sorted(c.eta for c in chords)
    expected = lattice_chord_lengths((0.0, 0.0), (0.5, 0.0), 3.0)
    err = max(abs(a - b) for a, b in zip(found, expected)) if len(found) == len(expected) else np.inf
    passed = len(found) == len(expected) and err <= 1e-6 and elapsed <= 60
    record(9, "Legendrian chords vs lattice", passed,
           f"{len(found)} chords vs {len(expected)} lattice vectors, max length error {err:.2e}, {elapsed:.1f} s")
    assert passed


def test_criterion_10_growth_classification():
    start = time.perf_counter()
    circ = growth_rate(rb.constant(rb.Circle(), SQRT2), [4.0, 8.0, 16.0, 32.0])
    torus = growth_rate(rb.constant(rb.FlatTorusUnitCotangent(2), 1.0), [2.0, 4.0, 8.0, 16.0],
                        chords=((0.0, 0.0), (0.5, 0.0)))
    elapsed = time.perf_counter() - start
    passed = (abs(circ.exponent - 1.0) <= 0.2 and circ.classification == "linear"
              and abs(torus.exponent - 2.0) <= 0.25 and torus.classification == "superlinear" and elapsed <= 300)
    record(10, "growth classification", passed,
           f"circle {circ.exponent:.3f} ({circ.classification}), torus chords {torus.exponent:.3f} "
           f"({torus.classification}), {elapsed:.1f} s")
    assert passed


# speed 1/(3 sqrt 3) keeps every torus critical value 3 sqrt(3) |v| off the integers
TORUS_SPEED = 1.0 / (3.0 * math.sqrt(3.0))
TORUS_SEARCH = {"seeds_per_unit": 3}


def test_criterion_11_monotonicity_and_additivity():
    circle_spec = rb.constant(rb.Circle(), SQRT2)
    torus_spec = rb.constant(rb.FlatTorusUnitCotangent(2), TORUS_SPEED)
    problems = {"circle": (circle_spec, {}), "flat-torus": (torus_spec, TORUS_SEARCH)}
    monotone, mus = {}, {}
    for name, (spec, search) in problems.items():
        cache = {}
        try:
            mus[name] = [mu_proxy(spec, float(m), cache=cache, **search) for m in range(1, 33)]
            monotone[name] = True
        except RuntimeError:
            monotone[name] = False
    rng = np.random.default_rng(11)
    additive = {}
    for name, (spec, search) in problems.items():
        n, m = 0.0, 8.0
        whole = spectrum(spec, n, m, **search)
        levels = np.array([v for v, _ in whole.values])
        cuts = []
        while len(cuts) < 20:
            c = rng.uniform(n + 0.1, m - 0.1)
            if len(levels) == 0 or np.min(np.abs(levels - c)) > 1e-2:
                cuts.append(c)
        bad = 0
        for c in cuts:
            left = spectrum(spec, n, c, **search).count
            right = spectrum(spec, c, m, **search).count
            bad += left + right != whole.count
        additive[name] = bad
    passed = all(monotone.values()) and not any(additive.values())
    detail = "; ".join(
        f"{k}: mu(1..32) {'non-decreasing' if monotone[k] else 'NOT monotone'} "
        f"({mus.get(k, ['?'])[0]}..{mus.get(k, ['?'])[-1]}), additivity failures {additive[k]}/20"
        for k in problems
    )
    record(11, "monotonicity and additivity", passed, detail)
    assert passed


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
