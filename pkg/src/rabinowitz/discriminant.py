"""Discriminant points and Legendrian chords found directly from the flow.

A discriminant point is a pair ``(x, eta)`` with ``phi_eta(x) = x`` and
``rho_eta(x) = 1``; equivalently the lifted map fixes ``(x, r)`` for every
``r``.  They are located by batched Newton iterations on the residual map
``(x, eta) -> lift(x, 1) - (x, 1)`` from a tensor grid of seeds, then
de-duplicated and grouped into connected components.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import null_space

from .errors import FlowError, UnsupportedModelError
from .geometry import Circle, FlatTorusUnitCotangent, IsotopySpec, _check_spec, flow_batch
from .symplectization import LiftedHamiltonian, canonical_field, lifted_flow

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-4
SINGULAR_TOL = 1e-6
MAX_STEP = 0.25
STALL_ITERS = 4


@dataclass
class DiscriminantPoint:
    x: np.ndarray
    eta: float
    action: float
    residual_x: float
    residual_rho: float
    component_id: int = -1
    nondegenerate: bool = False
    morse_bott_dim: int = 0
    sigma_min: float = 0.0


@dataclass
class LegendrianChordPoint:
    x: np.ndarray
    eta: float
    endpoint: np.ndarray
    residual: float
    action: float = float("nan")
    component_id: int = -1


@dataclass
class Component:
    component_id: int
    eta: float
    representative: np.ndarray
    size: int
    morse_bott_dim: int
    nondegenerate: bool
    members: list = field(default_factory=list)


@dataclass
class SearchStats:
    seeds: int = 0
    converged: int = 0
    unique: int = 0


def residual(spec, x, eta, tol=1e-12):
    """``(dist(phi_eta(x), x), |rho_eta(x) - 1|)`` for a single point."""
    model = spec.model
    xb = model.check(x)
    if eta == 0:
        return 0.0, 0.0
    x_end, rho, _, _ = flow_batch(model, spec, xb, eta, tol=tol)
    return float(model.distance(xb, x_end)[0]), float(abs(rho[0] - 1.0))


def default_seeds(model):
    """Seeds per chart dimension used when none are given."""
    if isinstance(model, Circle):
        return (32,)
    if isinstance(model, FlatTorusUnitCotangent):
        return (2,) * model.d + (64,) + (1,) * (model.d - 2)
    return (4,) * model.dim


def _eta_seeds(a, b, per_unit):
    n = max(1, int(math.ceil((b - a) * per_unit)))
    return a + (np.arange(n) + 0.5) * (b - a) / n


def _newton_batch(model, spec, x, eta, tol, max_iter, integrate_tol, window):
    """Batched damped Newton on ``(x, eta)``; returns ``(x, eta, converged)``."""
    H = LiftedHamiltonian(spec)
    x = x.copy()
    eta = eta.copy()
    done = np.zeros(len(x), bool)
    alive = np.ones(len(x), bool)
    lo, hi = window
    span = hi - lo
    # members whose residual has not dropped by 10% in STALL_ITERS iterations are abandoned
    best = np.full(len(x), np.inf)
    stalled = np.zeros(len(x), int)
    for _ in range(max_iter):
        act = np.flatnonzero(alive & ~done)
        if len(act) == 0:
            break
        try:
            res, J = _residual_and_jacobian(model, H, x[act], eta[act], integrate_tol)
        except FlowError:
            log.debug("flow failure in a Newton batch; retrying members singly")
            res = np.full((len(act), 2 * model.half), np.inf)
            J = np.zeros((len(act), 2 * model.half, model.dim + 1))
            for k, i in enumerate(act):
                try:
                    r1, J1 = _residual_and_jacobian(model, H, x[i : i + 1], eta[i : i + 1], integrate_tol)
                    res[k], J[k] = r1[0], J1[0]
                except FlowError:
                    pass
        norms = np.linalg.norm(res, axis=1)
        ok = norms <= tol
        done[act[ok]] = True
        bad = ~np.isfinite(norms)
        alive[act[bad]] = False
        better = norms < 0.9 * best[act]
        best[act] = np.where(better, norms, best[act])
        stalled[act] = np.where(better, 0, stalled[act] + 1)
        alive[act[(stalled[act] >= STALL_ITERS) & ~ok]] = False
        step_idx = ~ok & ~bad
        if not np.any(step_idx):
            continue
        idx = act[step_idx]
        delta = -np.einsum("bij,bj->bi", np.linalg.pinv(J[step_idx], rcond=1e-8), res[step_idx])
        size = np.linalg.norm(delta, axis=1)
        delta *= np.minimum(1.0, MAX_STEP / np.maximum(size, 1e-300))[:, None]
        E = model.tangent_basis(x[idx])
        x[idx] = model.retract(x[idx], np.einsum("bak,bk->ba", E, delta[:, :-1]))
        eta[idx] = eta[idx] + delta[:, -1]
        out = (eta[idx] < lo - 0.25 * span - 1) | (eta[idx] > hi + 0.25 * span + 1)
        alive[idx[out]] = False
    return x, eta, done & alive


def _residual_and_jacobian(model, H, x, eta, integrate_tol):
    z0 = model.to_canonical(x, 1.0)
    fl = lifted_flow(H, z0, eta, variational=True, tol=integrate_tol)
    res = model.canonical_difference(z0, fl.z_end)
    T = model.canonical_tangent(x)
    n = z0.shape[1]
    J = np.concatenate([np.einsum("bij,bjk->bik", fl.phi - np.eye(n), T), fl.w[:, :, None]], axis=2)
    return res, J


def _classify(model, spec, x, eta, integrate_tol):
    """Residuals, action, smallest deflated singular value and kernel dimension at converged points."""
    H = LiftedHamiltonian(spec)
    z0 = model.to_canonical(x, 1.0)
    fl = lifted_flow(H, z0, eta, variational=True, quadrature=True, tol=integrate_tol)
    x_end, r_end = model.from_canonical(fl.z_end)
    res_x = model.distance(x, x_end)
    res_rho = np.abs(1.0 / r_end - 1.0)
    # normalized action eta + (integral lambda - eta integral H) / kappa at r = kappa / h = 1 scale
    act = eta + (fl.lam - eta * fl.ham)
    n = z0.shape[1]
    T = model.canonical_tangent(x)
    J = np.concatenate([np.einsum("bij,bjk->bik", fl.phi - np.eye(n), T), fl.w[:, :, None]], axis=2)
    sv = np.linalg.svd(J, compute_uv=False)
    scale = np.maximum(1.0, sv[:, :1])
    kernel = np.sum(sv / scale <= SINGULAR_TOL, axis=1)
    if spec.autonomous:
        # chart coordinates of the contact vector field: the time-shift direction
        Y = np.einsum("bai,bi->ba", model.dx_dz(z0), canonical_field(H, z0, 0.0))
        u = np.concatenate([np.einsum("bik,bi->bk", T, Y), np.zeros((len(x), 1))], axis=1)
        smin = np.empty(len(x))
        for k in range(len(x)):
            basis = null_space(u[k][None, :])
            smin[k] = np.linalg.svd(J[k] @ basis, compute_uv=False).min()
    else:
        smin = sv[:, -1]
    return res_x, res_rho, act, smin, kernel


def _dedup(model, x, eta, tol=DEDUP_TOL):
    """Indices of points kept after merging pairs closer than ``tol`` in chart distance plus ``|d eta|``."""
    order = np.lexsort(tuple(x.T[::-1]) + (eta,))
    keep = []
    for i in order:
        dup = False
        for j in reversed(keep):
            if eta[i] - eta[j] > tol:
                break
            if float(model.distance(x[i], x[j])) + abs(eta[i] - eta[j]) <= tol:
                dup = True
                break
        if not dup:
            keep.append(i)
    return np.array(keep, dtype=int)


def cluster_components(points, cluster_tol=1e-6, link_radius=None, model=None, seeds_per_dim=None):
    """Group points into components: equal ``eta`` within ``cluster_tol`` and chained in ``x``.

    Two points at the same level are linked when their chart distance is at
    most ``link_radius``; with ``model`` and ``seeds_per_dim`` the model's
    seed-grid-scaled distance is used instead (linked at 1).  Assigns ``component_id`` on the points in place and returns the list of
    :class:`Component` ordered by ``(eta, representative)``.
    """
    if not points:
        return []
    if model is not None and seeds_per_dim is not None:
        radius = 1.0

        def dist(a, b):
            return float(model.link_distance(a, b, seeds_per_dim))

    else:
        radius = np.inf if link_radius is None else link_radius

        def dist(a, b):
            return float(model.distance(a, b)) if model is not None else float(np.linalg.norm(np.subtract(a, b)))

    order = sorted(range(len(points)), key=lambda i: (points[i].eta,) + tuple(np.asarray(points[i].x).ravel()))
    levels, cur = [], [order[0]]
    for i in order[1:]:
        if abs(points[i].eta - points[cur[-1]].eta) <= cluster_tol:
            cur.append(i)
        else:
            levels.append(cur)
            cur = [i]
    levels.append(cur)
    comps = []
    for level in levels:
        parent = {i: i for i in level}

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a_i, i in enumerate(level):
            for j in level[a_i + 1 :]:
                if dist(points[i].x, points[j].x) <= radius:
                    parent[find(i)] = find(j)
        groups = {}
        for i in level:
            groups.setdefault(find(i), []).append(i)
        ordered = sorted(groups.values(), key=lambda g: tuple(np.asarray(points[g[0]].x).ravel()))
        for g in ordered:
            comps.append(g)
    out = []
    for cid, g in enumerate(comps):
        members = [points[i] for i in g]
        for p in members:
            p.component_id = cid
        rep = members[0]
        mb = max(getattr(p, "morse_bott_dim", 0) for p in members)
        nd = all(getattr(p, "nondegenerate", True) for p in members)
        out.append(
            Component(
                component_id=cid,
                eta=float(np.mean([p.eta for p in members])),
                representative=np.asarray(rep.x).copy(),
                size=len(members),
                morse_bott_dim=int(mb),
                nondegenerate=bool(nd),
                members=members,
            )
        )
    return out


def find_discriminant(
    spec,
    window,
    seeds_per_unit=32,
    tol=1e-10,
    seeds_per_dim=None,
    max_iter=30,
    integrate_tol=1e-12,
    include_identity=False,
    cluster_tol=1e-6,
    stats=None,
):
    """Discriminant points with ``a < eta <= b``, each tagged with a component id.

    Seeds form the tensor product of the model's point grid and an ``eta``
    grid with ``seeds_per_unit`` points per unit length.  When
    ``include_identity`` is set and ``0`` lies in the window, one
    representative of the identity component ``eta = 0`` is added.
    """
    a, b = map(float, window)
    if not a < b:
        raise ValueError(f"window must satisfy a < b, got {window}")
    model = spec.model
    per_dim = default_seeds(model) if seeds_per_dim is None else seeds_per_dim
    xs = model.seed_points(per_dim)
    etas = _eta_seeds(a, b, seeds_per_unit)
    etas = etas[np.abs(etas) > 1e-12]
    X = np.repeat(xs, len(etas), axis=0)
    E = np.tile(etas, len(xs))
    x, eta, conv = _newton_batch(model, spec, X, E, tol, max_iter, integrate_tol, (a, b))
    slack = 1e-9
    keep = conv & (eta > a + slack) & (eta <= b + slack) & (np.abs(eta) > 1e-8)
    x, eta = model.normalize(x[keep]), eta[keep]
    idx = _dedup(model, x, eta)
    x, eta = x[idx], eta[idx]
    pts = []
    if len(x):
        rx, rr, act, smin, kern = _classify(model, spec, x, eta, integrate_tol)
        for i in range(len(x)):
            pts.append(
                DiscriminantPoint(
                    x=x[i],
                    eta=float(eta[i]),
                    action=float(act[i]),
                    residual_x=float(rx[i]),
                    residual_rho=float(rr[i]),
                    nondegenerate=bool(smin[i] > SINGULAR_TOL),
                    morse_bott_dim=int(kern[i]),
                    sigma_min=float(smin[i]),
                )
            )
    if include_identity and a < 0 <= b:
        pts.append(DiscriminantPoint(x=xs[0].copy(), eta=0.0, action=0.0, residual_x=0.0, residual_rho=0.0, morse_bott_dim=model.dim))
    cluster_components(pts, cluster_tol, model=model, seeds_per_dim=per_dim)
    pts.sort(key=lambda p: (p.component_id, p.eta) + tuple(p.x))
    if stats is not None:
        stats.seeds, stats.converged, stats.unique = len(X), int(keep.sum()), len(pts)
    return pts


def components_of(points, model=None):
    """Rebuild :class:`Component` records from points carrying component ids."""
    groups = {}
    for p in points:
        groups.setdefault(p.component_id, []).append(p)
    out = []
    for cid in sorted(groups):
        members = groups[cid]
        out.append(
            Component(
                component_id=cid,
                eta=float(np.mean([p.eta for p in members])),
                representative=np.asarray(members[0].x).copy(),
                size=len(members),
                morse_bott_dim=max(getattr(p, "morse_bott_dim", 0) for p in members),
                nondegenerate=all(getattr(p, "nondegenerate", True) for p in members),
                members=members,
            )
        )
    return out


def check_nonresonant(spec, window, points=None, tol=1e-6, **search):
    """True iff no nonzero critical value in the window lies within ``tol`` of an integer."""
    if points is None:
        points = find_discriminant(spec, window, **search)
    etas = np.array([p.eta for p in points if abs(p.eta) > 1e-8])
    if len(etas) == 0:
        return True
    return bool(np.all(np.abs(etas - np.round(etas)) > tol))


# ---------------------------------------------------------------------------
# Legendrian chords between cotangent fibers
# ---------------------------------------------------------------------------


def find_chords(
    spec,
    fiber0,
    fiber1,
    window,
    tol=1e-10,
    seeds_per_unit=4,
    directions_per_length=8,
    min_directions=32,
    max_iter=30,
    integrate_tol=1e-12,
    stats=None,
):
    """Chords ``(x, eta)`` from the unit conormal over ``fiber0`` to the one over ``fiber1``.

    ``x = (q0, p)`` ranges over the Legendrian fiber above ``q0``; a chord
    ends in the fiber above ``q1`` (modulo the lattice).  The number of
    direction seeds at multiplier ``eta`` is
    ``max(min_directions, ceil(2 pi |eta| directions_per_length))``.
    """
    model = spec.model
    if not isinstance(model, FlatTorusUnitCotangent):
        raise UnsupportedModelError("chords are implemented for flat-torus unit cotangent bundles")
    d = model.d
    q0 = np.asarray(fiber0, dtype=float).ravel()
    q1 = np.asarray(fiber1, dtype=float).ravel()
    if q0.size != d or q1.size != d:
        raise ValueError(f"fibers need {d} coordinates")
    if np.max(np.abs(q1 - q0 - np.round(q1 - q0))) < 1e-12:
        raise ValueError("fibers must be distinct")
    a, b = map(float, window)
    if not a < b:
        raise ValueError(f"window must satisfy a < b, got {window}")
    seeds_x, seeds_eta = [], []
    for eta in _eta_seeds(a, b, seeds_per_unit):
        if abs(eta) < 1e-12:
            continue
        n = max(min_directions, int(math.ceil(2 * math.pi * abs(eta) * directions_per_length)))
        ps = model.sphere_points(n if d == 2 else n * n // 4)
        seeds_x.append(np.hstack([np.broadcast_to(q0, (len(ps), d)), ps]))
        seeds_eta.append(np.full(len(ps), eta))
    if not seeds_x:
        return []
    X = np.vstack(seeds_x)
    Eta = np.concatenate(seeds_eta)
    p, eta, conv = _chord_newton(model, spec, q0, q1, X[:, d:], Eta, tol, max_iter, integrate_tol, (a, b))
    slack = 1e-9
    keep = conv & (eta > a + slack) & (eta <= b + slack)
    x = np.hstack([np.broadcast_to(q0, (int(keep.sum()), d)), p[keep]])
    eta = eta[keep]
    idx = _dedup(model, x, eta)
    x, eta = x[idx], eta[idx]
    out = []
    if len(x):
        x_end, _, _, _ = flow_batch(model, spec, x, eta, tol=integrate_tol)
        res = np.linalg.norm(_wrap(x_end[:, :d] - q1), axis=1)
        H = LiftedHamiltonian(spec, shift=1.0)
        fl = lifted_flow(H, model.to_canonical(x, 1.0), eta, quadrature=True, tol=integrate_tol)
        act = fl.lam - eta * fl.ham
        for i in range(len(x)):
            out.append(
                LegendrianChordPoint(
                    x=x[i], eta=float(eta[i]), endpoint=x_end[i], residual=float(res[i]), action=float(act[i]), component_id=i
                )
            )
    if stats is not None:
        stats.seeds, stats.converged, stats.unique = len(X), int(keep.sum()), len(out)
    return out


def _wrap(d):
    return d - np.floor(d + 0.5)


def _chord_newton(model, spec, q0, q1, p, eta, tol, max_iter, integrate_tol, window):
    d = model.d
    p = p.copy()
    eta = eta.copy()
    done = np.zeros(len(p), bool)
    alive = np.ones(len(p), bool)
    lo, hi = window
    for _ in range(max_iter):
        act = np.flatnonzero(alive & ~done)
        if len(act) == 0:
            break
        x = np.hstack([np.broadcast_to(q0, (len(act), d)), p[act]])
        x_end, _, _, jac = flow_batch(model, spec, x, eta[act], tol=integrate_tol, jacobian=True)
        res = _wrap(x_end[:, :d] - q1)
        norms = np.linalg.norm(res, axis=1)
        ok = norms <= tol
        done[act[ok]] = True
        step = ~ok & np.isfinite(norms)
        alive[act[~np.isfinite(norms)]] = False
        if not np.any(step):
            continue
        idx = act[step]
        Ep = model._sphere_basis(p[idx])
        Jp = np.einsum("bij,bjk->bik", jac[step][:, :d, d:], Ep)
        Y, _ = _sigma_at(model, spec, x_end[step], eta[idx])
        J = np.concatenate([Jp, Y[:, :d, None]], axis=2)
        delta = -np.einsum("bij,bj->bi", np.linalg.pinv(J, rcond=1e-8), res[step])
        size = np.linalg.norm(delta, axis=1)
        delta *= np.minimum(1.0, MAX_STEP / np.maximum(size, 1e-300))[:, None]
        pn = p[idx] + np.einsum("bak,bk->ba", Ep, delta[:, :-1])
        p[idx] = pn / np.linalg.norm(pn, axis=1, keepdims=True)
        eta[idx] += delta[:, -1]
        out = (eta[idx] < lo - 1) | (eta[idx] > hi + 1)
        alive[idx[out]] = False
    return p, eta, done & alive


def _sigma_at(model, spec, x, t):
    from .geometry import _sigma_field

    return _sigma_field(model, spec, x, t)


# ---------------------------------------------------------------------------
# conjugation by contactomorphisms
# ---------------------------------------------------------------------------


class Contactomorphism:
    """A contactomorphism ``psi`` of a model with ``psi^* alpha = f alpha``."""

    model_type = object

    def apply(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    def factor(self, x):
        """Conformal factor ``f`` at ``x``."""
        raise NotImplementedError

    def factor_grad(self, x):
        raise NotImplementedError

    def push_covector(self, x, cov):
        """Covector at ``psi(x)`` corresponding to ``cov`` at ``x`` (``cov . Dpsi^{-1}``)."""
        raise NotImplementedError


class Identity(Contactomorphism):
    def apply(self, x):
        return np.array(x, dtype=float)

    inverse = apply

    def factor(self, x):
        return np.ones(len(np.atleast_2d(x)))

    def factor_grad(self, x):
        return np.zeros_like(np.atleast_2d(x), dtype=float)

    def push_covector(self, x, cov):
        return cov


class CircleRotation(Contactomorphism):
    model_type = Circle

    def __init__(self, c):
        self.c = float(c)

    def apply(self, x):
        return np.mod(np.asarray(x, dtype=float) + self.c, 1.0)

    def inverse(self, y):
        return np.mod(np.asarray(y, dtype=float) - self.c, 1.0)

    def factor(self, x):
        return np.ones(len(np.atleast_2d(x)))

    def factor_grad(self, x):
        return np.zeros_like(np.atleast_2d(x), dtype=float)

    def push_covector(self, x, cov):
        return cov


class CircleDiffeo(Contactomorphism):
    """``psi(x) = x + g(x)`` on the circle with ``1 + g' > 0``; here ``f = psi'``."""

    model_type = Circle

    def __init__(self, g: Callable, dg: Callable, d2g: Callable, name="diffeo"):
        self.g, self.dg, self.d2g, self.name = g, dg, d2g, name
        grid = np.linspace(0, 1, 4097)
        if np.min(1 + dg(grid)) <= 0:
            raise ValueError("x + g(x) is not a diffeomorphism of the circle")

    @classmethod
    def sine(cls, eps):
        """``psi(x) = x + eps sin(2 pi x)``."""
        tau = 2 * np.pi
        return cls(
            lambda x: eps * np.sin(tau * x),
            lambda x: eps * tau * np.cos(tau * x),
            lambda x: -eps * tau**2 * np.sin(tau * x),
            name=f"x+{eps}sin(2pi x)",
        )

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return np.mod(x + self.g(x), 1.0)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        x = y - self.g(y - self.g(y))
        for _ in range(60):
            step = (x + self.g(x) - y) / (1 + self.dg(x))
            x = x - step
            if np.max(np.abs(step)) < 1e-14:
                break
        return np.mod(x, 1.0)

    def factor(self, x):
        return 1 + self.dg(np.atleast_2d(x)[:, 0])

    def factor_grad(self, x):
        return self.d2g(np.atleast_2d(x)[:, :1])

    def push_covector(self, x, cov):
        return cov / (1 + self.dg(np.atleast_2d(x)[:, :1]))


class TorusTranslation(Contactomorphism):
    model_type = FlatTorusUnitCotangent

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float).ravel()

    def _pad(self, x):
        x = np.atleast_2d(x)
        return np.r_[self.c, np.zeros(x.shape[1] - self.c.size)]

    def apply(self, x):
        x = np.array(x, dtype=float)
        xb = np.atleast_2d(x)
        out = xb + self._pad(xb)
        out[:, : self.c.size] = np.mod(out[:, : self.c.size], 1.0)
        return out.reshape(x.shape)

    def inverse(self, y):
        y = np.array(y, dtype=float)
        yb = np.atleast_2d(y)
        out = yb - self._pad(yb)
        out[:, : self.c.size] = np.mod(out[:, : self.c.size], 1.0)
        return out.reshape(y.shape)

    def factor(self, x):
        return np.ones(len(np.atleast_2d(x)))

    def factor_grad(self, x):
        return np.zeros_like(np.atleast_2d(x), dtype=float)

    def push_covector(self, x, cov):
        return cov


def conjugate_spec(spec, psi):
    """Contact Hamiltonian ``(f h_t) o psi^{-1}`` of the conjugated path ``psi phi_t psi^{-1}``."""
    model = spec.model
    if isinstance(psi, Identity):
        return spec
    if not isinstance(psi, Contactomorphism) or not isinstance(model, psi.model_type):
        raise UnsupportedModelError(f"{type(psi).__name__} is not available on {model!r}")
    if isinstance(psi, TorusTranslation) and psi.c.size != model.d:
        raise ValueError("translation vector has the wrong dimension")

    def h(y, t):
        x = psi.inverse(y)
        return psi.factor(x) * spec.value(x, t)

    def dh_dx(y, t):
        x = psi.inverse(y)
        f = psi.factor(x)[:, None]
        g = psi.factor_grad(x) * spec.value(x, t)[:, None] + f * spec.grad(x, t)
        return psi.push_covector(x, g)

    def dh_dt(y, t):
        x = psi.inverse(y)
        return psi.factor(x) * spec.dt(x, t)

    return IsotopySpec(
        model,
        h=h,
        dh_dx=dh_dx,
        dh_dt=dh_dt,
        autonomous=spec.autonomous,
        periodic=spec.periodic,
        name=f"conjugated({spec.name})",
        params={"base": dict(spec.params), "psi": type(psi).__name__},
    )


def match_sets(model, points_a, points_b, psi: Optional[Contactomorphism] = None):
    """Max ``(eta, x)`` mismatch after mapping ``points_a`` by ``psi``; points matched greedily.

    Returns ``(max_eta_error, max_x_error, unmatched)``.
    """
    psi = Identity() if psi is None else psi
    used = set()
    worst_eta = worst_x = 0.0
    unmatched = 0
    for p in points_a:
        y = psi.apply(np.atleast_2d(p.x))[0]
        best, best_cost = None, np.inf
        for j, q in enumerate(points_b):
            if j in used:
                continue
            cost = abs(p.eta - q.eta) + float(model.distance(y, q.x))
            if cost < best_cost:
                best, best_cost = j, cost
        if best is None or best_cost > 1e-3:
            unmatched += 1
            continue
        used.add(best)
        worst_eta = max(worst_eta, abs(p.eta - points_b[best].eta))
        worst_x = max(worst_x, float(model.distance(y, points_b[best].x)))
    unmatched += len(points_b) - len(used)
    return worst_eta, worst_x, unmatched


def conjugate_points(spec, psi, points, tol=1e-10, integrate_tol=1e-12):
    """Refine ``(psi(x), eta)`` for each point as a discriminant point of the conjugated spec.

    Returns a list of :class:`DiscriminantPoint` (same order; unconverged
    entries have infinite residuals).
    """
    conj = conjugate_spec(spec, psi)
    model = spec.model
    if not points:
        return []
    X = psi.apply(np.vstack([p.x for p in points]))
    E = np.array([p.eta for p in points])
    lo, hi = E.min() - 1, E.max() + 1
    x, eta, conv = _newton_batch(model, conj, X, E, tol, 30, integrate_tol, (lo, hi))
    rx, rr, act, smin, kern = _classify(model, conj, model.normalize(x), eta, integrate_tol)
    out = []
    for i in range(len(points)):
        out.append(
            DiscriminantPoint(
                x=model.normalize(x[i : i + 1])[0],
                eta=float(eta[i]),
                action=float(act[i]),
                residual_x=float(rx[i]) if conv[i] else np.inf,
                residual_rho=float(rr[i]) if conv[i] else np.inf,
                nondegenerate=bool(smin[i] > SINGULAR_TOL),
                morse_bott_dim=int(kern[i]),
                sigma_min=float(smin[i]),
            )
        )
    return out
