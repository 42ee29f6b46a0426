"""Filtered action spectra, the spectral-count growth proxy and the rotation oracle."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .discriminant import components_of, find_chords, find_discriminant

GROWTH_CLASSES = ((0.8, "sublinear"), (1.2, "linear"))


@dataclass
class SpectrumWindow:
    """Critical values in ``(n, m]`` grouped by value.

    ``values`` lists ``(eta, number of components at eta)``; ``dim_proxy``
    counts each one-dimensional Morse-Bott component twice and any other
    component once.
    """

    n: float
    m: float
    values: list
    count: int
    dim_proxy: int
    components: list = field(default_factory=list)


def _group_values(etas, tol=1e-6):
    etas = np.sort(np.asarray(etas, dtype=float))
    values = []
    for e in etas:
        if values and abs(e - values[-1][0]) <= tol:
            values[-1][1] += 1
        else:
            values.append([float(e), 1])
    return [(e, k) for e, k in values]


def window_from_components(components, n, m, slack=1e-9):
    comps = [c for c in components if n + slack < c.eta <= m + slack and abs(c.eta) > 1e-8]
    values = _group_values([c.eta for c in comps])
    dim_proxy = sum(2 if c.morse_bott_dim == 1 else 1 for c in comps)
    return SpectrumWindow(n=float(n), m=float(m), values=values, count=len(comps), dim_proxy=dim_proxy, components=comps)


def spectrum(spec, n, m, points=None, **search):
    """Spectral window ``(n, m]`` of the periodic problem (identity component excluded)."""
    if not n < m:
        raise ValueError(f"need n < m, got ({n}, {m})")
    if points is None:
        points = find_discriminant(spec, (n, m), **search)
    etas = [p.eta for p in points]
    for edge in (n, m):
        if any(abs(e - edge) <= 1e-6 for e in etas):
            warnings.warn(f"critical value at the window edge {edge}", stacklevel=2)
    return window_from_components(components_of(points), n, m)


@dataclass
class _ChordComponent:
    eta: float
    morse_bott_dim: int = 0


def chord_spectrum(spec, fiber0, fiber1, n, m, chords=None, **search):
    """Spectral window ``(n, m]`` of chord lengths between two cotangent fibers."""
    if not n < m:
        raise ValueError(f"need n < m, got ({n}, {m})")
    if chords is None:
        chords = find_chords(spec, fiber0, fiber1, (n, m), **search)
    return window_from_components([_ChordComponent(c.eta) for c in chords], n, m)


def mu_proxy(spec, m, points=None, cache=None, **search):
    """Number of spectral components in ``(0, m]``.

    With a ``cache`` dict the value is checked against earlier results for
    the same spec so that the proxy stays non-decreasing in ``m``.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    value = spectrum(spec, 0.0, m, points=points, **search).count
    if cache is not None:
        seen = cache.setdefault(id(spec), {})
        for m_old, v_old in seen.items():
            if (m_old <= m and v_old > value) or (m_old >= m and v_old < value):
                raise RuntimeError(f"spectral count not monotone: mu({m_old})={v_old}, mu({m})={value}")
        seen[m] = value
    return value


@dataclass
class GrowthReport:
    m: np.ndarray
    mu: np.ndarray
    exponent: float
    intercept: float
    classification: str
    undefined: bool = False

    @property
    def slope(self):
        return self.exponent


def fit_growth(m_list, mu):
    """Least-squares exponent of ``mu ~ m^p`` on log-log axes, ignoring zero counts."""
    m = np.asarray(m_list, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(np.diff(mu) < 0):
        raise RuntimeError("spectral counts decrease along m")
    keep = mu > 0
    if keep.sum() < 2:
        return GrowthReport(m, mu, float("nan"), float("nan"), "undefined", undefined=True)
    p, c = np.polyfit(np.log(m[keep]), np.log(mu[keep]), 1)
    label = "superlinear"
    for bound, name in GROWTH_CLASSES:
        if p < bound or (name == "linear" and p <= bound):
            label = name
            break
    return GrowthReport(m, mu, float(p), float(c), label)


def growth_rate(spec, m_list, chords=None, **search):
    """Growth exponent of the spectral count over ``m_list``.

    With ``chords=(q0, q1)`` chords between the two fibers are counted,
    otherwise periodic components.  A single search over ``(0, max m]`` is
    filtered for every entry.
    """
    m = np.asarray(m_list, dtype=float)
    if len(m) < 4 or np.any(np.diff(m) <= 0) or m[0] <= 0:
        raise ValueError("m_list must be positive, increasing and of length >= 4")
    top = float(m[-1])
    if chords is not None:
        found = find_chords(spec, chords[0], chords[1], (0.0, top), **search)
        comps = [_ChordComponent(c.eta) for c in found]
    else:
        comps = components_of(find_discriminant(spec, (0.0, top), **search))
    mu = np.array([window_from_components(comps, 0.0, mj).count for mj in m])
    return fit_growth(m, mu)


@dataclass
class CircleOracle:
    eta_values: list
    component_count: int
    bruteforce_count: int
    paper_formula_value: int
    note: str


def circle_oracle(a, n, m):
    """Exact critical values ``k / a`` in ``(n, m]`` for the rotation ``x -> x + a t``.

    Also reports the closed-form count ``2 (floor(m/a) - floor(n/a))`` and a
    note when it differs from the enumeration.
    """
    a = float(a)
    if not a > 0:
        raise ValueError("rotation speed must be positive")
    if n > m:
        raise ValueError("need n <= m")
    frac = Fraction(a).limit_denominator(10_000)
    if abs(float(frac) - a) < 1e-12:
        warnings.warn(f"rotation speed {a} is rational ({frac}) to float precision", stacklevel=2)
    ks = range(math.floor(n * a) - 1, math.ceil(m * a) + 2)
    etas = sorted(k / a for k in ks if k != 0 and n < k / a <= m)
    brute = len(etas)
    formula = 2 * (math.floor(m / a) - math.floor(n / a))
    note = ""
    if formula != brute:
        note = (
            f"closed-form count {formula} differs from the enumeration {brute}: "
            f"the enumeration counts k with n < k/a <= m, the closed form uses floor(m/a)"
        )
    return CircleOracle(
        eta_values=etas,
        component_count=brute,
        bruteforce_count=brute,
        paper_formula_value=formula,
        note=note,
    )
