"""Cutoff profiles and the cut-off Hamiltonian on the cone.

``F(x, r, t) = r [beta(r) h_t(x) + (1 - beta(r)) hbar(r)] - kappa`` where
``beta`` is a C^1 cubic bump equal to one on ``[2, R kappa]`` and ``hbar``
is the step function ``m`` for ``r <= 2`` and ``M`` beyond.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import PositivityError
from .geometry import default_grid, flow_batch, reeb_derivative
from .symplectization import ConeFunction, _bx

MARGIN_BOUNDS = 0.01
MARGIN_CONSTANTS = 0.05


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_slope(u):
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, 6.0 * u * (1.0 - u), 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """Parameters ``(kappa, R, m, M)`` of the cutoff together with the constant ``C`` they were chosen for."""

    kappa: float
    R: float
    m: float
    M: float
    C: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "R", "m", "M", "C"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.kappa > 1:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")
        if not self.R > 1:
            raise ValueError(f"R must exceed 1, got {self.R}")
        if not 0 < self.m <= self.M:
            raise ValueError(f"need 0 < m <= M, got m={self.m}, M={self.M}")
        if self.C < 0:
            raise ValueError("C must be nonnegative")
        if self.top < 2:
            raise ValueError(f"R * kappa = {self.top} leaves no plateau (needs >= 2)")

    @property
    def top(self):
        """Right end ``R kappa`` of the plateau."""
        return self.R * self.kappa

    def beta(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= 2.0, _smoothstep(r - 1.0), 1.0 - _smoothstep(r - self.top))

    def dbeta(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= 2.0, _smoothstep_slope(r - 1.0), -_smoothstep_slope(r - self.top))

    def hbar(self, r):
        return np.where(np.asarray(r, dtype=float) <= 2.0, self.m, self.M)

    def kinks(self):
        return (1.0, 2.0, self.top, self.top + 1.0)

    def to_dict(self):
        return asdict(self)


class CutoffHamiltonian(ConeFunction):
    """The cut-off Hamiltonian built from ``profile`` and the contact Hamiltonian ``spec``."""

    def __init__(self, profile, spec):
        self.profile = profile
        self.spec = spec
        self.model = spec.model
        self.kappa = profile.kappa

    def _parts(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return x, r, t, self.profile.beta(r), self.spec.value(x, t), self.profile.hbar(r)

    def value(self, x, r, t):
        x, r, t, b, h, hb = self._parts(x, r, t)
        return r * (b * h + (1 - b) * hb) - self.kappa

    def d_r(self, x, r, t):
        x, r, t, b, h, hb = self._parts(x, r, t)
        return b * h + (1 - b) * hb + r * self.profile.dbeta(r) * (h - hb)

    def d_x(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return (r * self.profile.beta(r))[:, None] * self.spec.grad(x, t)

    def d_t(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return r * self.profile.beta(r) * self.spec.dt(x, t)

    def ramp_term(self, x, r, t):
        """``r^2 beta'(r) (h_t(x) - hbar(r))``, the defect of the Liouville identity."""
        x, r, t, b, h, hb = self._parts(x, r, t)
        return r * r * self.profile.dbeta(r) * (h - hb)

    def kinks(self):
        return self.profile.kinks()


def F_eval(profile, spec, t, p):
    """Value of the cut-off Hamiltonian at the cone point ``p`` and time ``t``."""
    return float(CutoffHamiltonian(profile, spec).value(p.x[None, :], p.r, t)[0])


def bounds_mM(spec, grid=None, margin=MARGIN_BOUNDS):
    """Bounds ``m <= min h`` and ``M >= max h`` from a sample grid, widened by ``margin``."""
    model = spec.model
    pts, times = default_grid(model, 64, 64) if grid is None else grid
    pts = model.check(pts)
    times = np.asarray(times, dtype=float).ravel()
    hv = spec.value(np.repeat(pts, len(times), axis=0), np.tile(times, len(pts)))
    lo, hi = float(np.min(hv)), float(np.max(hv))
    if not lo > 0:
        raise PositivityError(f"h is not positive on the sample grid (min {lo:.6g})")
    return (1 - margin) * lo, (1 + margin) * hi


def _C_integrand(model, spec, x, t, eta, tol):
    """``eta * dh_s(R)(phi_s x) / rho_s(x)`` at ``s = eta t`` for matched batches."""
    s = eta * t
    x_s, rho, _, _ = flow_batch(model, spec, x, s, tol=tol)
    return eta * reeb_derivative(model, spec, s, x_s) / rho


def constant_C(spec, a, b, grid=(64, 64, 8), refine=True, tol=1e-10):
    """Maximum of ``|eta rhodot_{eta t}(x) / rho_{eta t}(x)^2|`` over ``x``, ``t in [0,1]`` and ``|eta| <= max(|a|, |b|)``.

    ``grid = (n_x, n_t, n_eta)``; the eta samples include both extremes.
    The best grid point is refined once by a bounded local search.
    """
    model = spec.model
    eta_max = max(abs(a), abs(b))
    if eta_max == 0:
        return 0.0
    n_x, n_t, n_eta = grid
    pts, _ = default_grid(model, n_x, 1)
    ts = np.linspace(0.0, 1.0, n_t)
    etas = np.linspace(-eta_max, eta_max, max(n_eta, 2))
    best = (0.0, None)
    for eta in etas:
        if eta == 0:
            continue
        x_end, rho, ys, _ = flow_batch(model, spec, pts, eta, tol=tol, s_eval=ts)
        n = model.ambient
        for j, t in enumerate(ts):
            xs = ys[j, :, :n]
            rate = reeb_derivative(model, spec, eta * t, xs)
            vals = np.abs(eta * rate / ys[j, :, n])
            k = int(np.argmax(vals))
            if vals[k] > best[0]:
                best = (float(vals[k]), (pts[k], t, eta))
    if best[1] is None or not refine:
        return best[0]
    return max(best[0], _local_search(model, spec, best[1], eta_max, tol))


def _local_search(model, spec, start, eta_max, tol, rounds=12, batch=32):
    """Shrinking random pattern search around ``start = (x, t, eta)``, batched per round."""
    x0, t0, e0 = start
    E = model.tangent_basis(x0)[0]
    rng = np.random.default_rng(0)
    d = model.dim + 2
    center = np.r_[np.zeros(model.dim), t0, e0]
    step = np.r_[np.full(model.dim, 0.05), 0.05, 0.05 * eta_max]
    best = -np.inf
    for _ in range(rounds):
        cand = center + step * rng.uniform(-1, 1, (batch, d))
        cand = np.vstack([center, cand])
        cand[:, -2] = np.clip(cand[:, -2], 0.0, 1.0)
        cand[:, -1] = np.clip(cand[:, -1], -eta_max, eta_max)
        xs = model.retract(np.repeat(x0[None], len(cand), axis=0), cand[:, : model.dim] @ E.T)
        vals = np.abs(_C_integrand(model, spec, xs, cand[:, -2], cand[:, -1], tol))
        k = int(np.argmax(vals))
        if vals[k] >= best:
            best, center = float(vals[k]), cand[k]
        step = step * 0.6
    return best


@dataclass(frozen=True)
class WindowConstants:
    """Admissible thresholds for the action window ``(a, b)``."""

    a: float
    b: float
    C: float
    kappa0: float
    R0: float
    m: float
    M: float

    def profile(self, kappa=None, R=None):
        """Cutoff profile at ``(kappa, R)``, defaulting to the thresholds."""
        return CutoffProfile(
            kappa=self.kappa0 if kappa is None else kappa,
            R=self.R0 if R is None else R,
            m=self.m,
            M=self.M,
            C=self.C,
        )

    def to_dict(self):
        return asdict(self)


def thresholds(m, M, C, margin=MARGIN_CONSTANTS):
    eC = np.exp(C)
    kappa0 = (1 + margin) * max(1.0, 3 * M * eC)
    R0 = (1 + margin) * max(eC / m + 1, 1 / M)
    return float(kappa0), float(R0)


def admissible_constants(spec, a, b, grid=None, C=None, C_grid=(64, 64, 8)):
    """Thresholds ``kappa0, R0`` above which the cutoff localizes critical points of action in ``(a, b)``."""
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    m, M = bounds_mM(spec, grid)
    if C is None:
        C = constant_C(spec, a, b, grid=C_grid)
    kappa0, R0 = thresholds(m, M, C)
    return WindowConstants(a=float(a), b=float(b), C=float(C), kappa0=kappa0, R0=R0, m=m, M=M)


def ramp_sign_violation(profile, spec, points, times, radii):
    """Most negative value of ``beta'(r) (h_t(x) - hbar(r))`` on a grid (0 if none)."""
    F = CutoffHamiltonian(profile, spec)
    model = spec.model
    pts = model.as_batch(points)
    X = np.repeat(pts, len(times) * len(radii), axis=0)
    T = np.tile(np.repeat(times, len(radii)), len(pts))
    Rr = np.tile(radii, len(pts) * len(times))
    vals = F.ramp_term(X, Rr, T)
    return float(min(0.0, np.min(vals)))
