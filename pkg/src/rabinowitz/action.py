"""Discrete normalized action functional on loops in the cone, its gradient and critical-point solvers.

A loop is stored by its ``N`` nodes ``u_i = u(i/N)`` in canonical coordinates
together with the multiplier ``eta``.  With ``Delta_i`` the (wrapped) chord
``u_{i+1} - u_i`` the discrete action is

    A = (1/kappa) * (sum_i lambda(u_i + Delta_i/2) . Delta_i
                     - eta * sum_i w_i F(u_i, eta t_i) / N)

where node 0 carries the average of the time slices ``0`` and ``eta`` (the
closing node of the trapezoid rule).  Its exact differential is

    dA(xi, l) = (1/kappa) * ((1/N) sum_i omega(xi_i, G_i) - l * G_eta)

with ``G_i = (Delta_i + Delta_{i-1}) N/2 - eta X_F(u_i)`` and
``G_eta = trapezoid of F + eta t dF/dt``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cutoff import CutoffHamiltonian
from .errors import DomainError, FlowError
from .symplectization import ConePoint, canonical_field, canonical_gradient, lifted_flow

log = logging.getLogger(__name__)

MIN_NODES = 16


@dataclass
class Loop:
    """Closed discrete loop ``(u_0, ..., u_{N-1})`` in canonical coordinates with multiplier ``eta``."""

    model: object
    z: np.ndarray
    eta: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z = np.array(self.z, dtype=float)
        self.eta = float(self.eta)
        if self.z.ndim != 2 or self.z.shape[1] != 2 * self.model.half:
            raise DomainError("loop nodes must have shape (N, 2k)")
        if len(self.z) < MIN_NODES:
            raise DomainError(f"loop needs at least {MIN_NODES} nodes")
        _, r = self.model.from_canonical(self.z)
        if np.any(r <= 0) or not np.all(np.isfinite(self.z)):
            raise DomainError("loop leaves the cone (r <= 0)")

    @property
    def N(self):
        return len(self.z)

    @property
    def x(self):
        return self.model.from_canonical(self.z)[0]

    @property
    def r(self):
        return self.model.from_canonical(self.z)[1]

    def points(self):
        x, r = self.model.from_canonical(self.z)
        return [ConePoint(xi, ri) for xi, ri in zip(x, r)]

    def max_jump(self):
        """Largest wrapped chord between cyclically adjacent nodes."""
        d = self.model.canonical_difference(self.z, np.roll(self.z, -1, axis=0))
        return float(np.max(np.linalg.norm(d, axis=1)))

    def copy(self, z=None, eta=None):
        return Loop(self.model, self.z if z is None else z, self.eta if eta is None else eta, dict(self.meta))


@dataclass
class Chord:
    """Discrete path ``u_0 .. u_{N-1}`` with multiplier ``eta`` and endpoint constraints."""

    model: object
    z: np.ndarray
    eta: float
    meta: dict = field(default_factory=dict)

    def endpoint_residual(self, in_L0, in_L1):
        """Max of the membership residuals of the first and last node."""
        return max(float(in_L0(self.z[0])), float(in_L1(self.z[-1])))


@dataclass
class GradientVector:
    loop_part: np.ndarray
    eta_part: float


def _hamiltonian(profile, spec):
    return profile if profile is not None and not hasattr(profile, "beta") else CutoffHamiltonian(profile, spec)


def _node_terms(F, model, z, eta):
    """Per-node data: ``G`` (N, 2k), ``c`` (N,) with ``G_eta = sum c`` and ``Fbar`` (N,)."""
    N = len(z)
    t = np.arange(N) / N
    tau = eta * t
    fwd = model.canonical_difference(z, np.roll(z, -1, axis=0))
    D = (fwd + np.roll(fwd, 1, axis=0)) * (N / 2)
    X = canonical_field(F, z, tau)
    x, r = model.from_canonical(z)
    Fv = F.value(x, r, tau)
    Fd = F.d_t(x, r, tau)
    z0 = z[:1]
    X1 = canonical_field(F, z0, eta)
    F1 = F.value(x[:1], r[:1], eta)[0]
    Fd1 = F.d_t(x[:1], r[:1], eta)[0]
    Xbar = X.copy()
    Xbar[0] = 0.5 * (X[0] + X1[0])
    G = D - eta * Xbar
    Fbar = Fv.copy()
    Fbar[0] = 0.5 * (Fv[0] + F1)
    c = (Fv + eta * t * Fd) / N
    c[0] = 0.5 * (Fv[0] + F1 + eta * Fd1) / N
    return G, c, Fbar, fwd


def action(loop, profile, spec=None):
    """Normalized discrete action of ``loop``.

    ``profile`` is a :class:`~rabinowitz.cutoff.CutoffProfile` (combined with
    ``spec``) or any cone function with a ``kappa`` attribute.
    """
    F = _hamiltonian(profile, spec)
    model = loop.model
    z, eta = loop.z, loop.eta
    N = len(z)
    fwd = model.canonical_difference(z, np.roll(z, -1, axis=0))
    lam = np.einsum("bi,bi->", model.liouville(z + fwd / 2), fwd)
    x, r = model.from_canonical(z)
    Fv = F.value(x, r, eta * np.arange(N) / N)
    F1 = F.value(x[:1], r[:1], eta)[0]
    ham = (np.sum(Fv) - 0.5 * Fv[0] + 0.5 * F1) / N
    return float((lam - eta * ham) / F.kappa)


def gradient(loop, profile, spec=None):
    """Discrete gradient ``(u' - eta X_F, integral of F + eta t dF/dt)``."""
    F = _hamiltonian(profile, spec)
    G, c, _, _ = _node_terms(F, loop.model, loop.z, loop.eta)
    return GradientVector(loop_part=G, eta_part=float(np.sum(c)))


def gradient_norm(loop, profile, spec=None):
    F = _hamiltonian(profile, spec)
    g = gradient(loop, F)
    N = loop.N
    return float(np.sqrt((np.sum(g.loop_part**2) / N + g.eta_part**2) / F.kappa))


def directional_derivative(loop, profile, spec, xi, l):
    """``dA`` applied to the variation ``(xi, l)`` via the gradient pairing."""
    F = _hamiltonian(profile, spec)
    g = gradient(loop, F)
    om = np.einsum("bi,ij,bj->", xi, loop.model.omega, g.loop_part)
    return float((om / loop.N - l * g.eta_part) / F.kappa)


def _residual_vector(F, model, z, eta):
    G, c, _, _ = _node_terms(F, model, z, eta)
    N = len(z)
    return np.r_[G.ravel() / np.sqrt(N), np.sum(c)] / np.sqrt(F.kappa)


def _residual_jacobian(F, model, z, eta, step=1e-7):
    """Dense Jacobian of the scaled residual vector by colored central differences."""
    N, n = z.shape
    size = N * n + 1
    J = np.zeros((size, size))
    scale = 1.0 / np.sqrt(F.kappa)
    colors = next(k for k in (3, 4, 5, 6, 7, N) if N % k == 0)
    idx = np.arange(N)
    for color in range(colors):
        nodes = idx[idx % colors == color]
        for j in range(n):
            e = np.zeros_like(z)
            e[nodes, j] = step
            Gp, cp, _, _ = _node_terms(F, model, z + e, eta)
            Gm, cm, _, _ = _node_terms(F, model, z - e, eta)
            dG = (Gp - Gm) / (2 * step) / np.sqrt(N) * scale
            dc = (cp - cm) / (2 * step) * scale
            col = nodes * n + j
            for shift in (-1, 0, 1):
                rows_node = (nodes + shift) % N
                for a in range(n):
                    J[rows_node * n + a, col] = dG[rows_node, a]
            J[-1, col] = dc[nodes]
    J[:, -1] = (_residual_vector(F, model, z, eta + step) - _residual_vector(F, model, z, eta - step)) / (2 * step)
    return J


def descend(loop, profile, spec=None, max_steps=200, tol=1e-8, mode="residual"):
    """Drive ``loop`` toward a critical point of the discrete action.

    ``mode="residual"`` runs Levenberg-Marquardt on the discrete gradient, so
    the gradient norm decreases on every accepted step; this finds saddle
    points of the (indefinite) functional.  ``mode="action"`` takes steepest
    descent steps with Armijo backtracking (factor 0.5 from step 1), so the
    action is non-increasing.

    The returned loop carries ``meta`` keys ``converged``, ``steps``
    (accepted steps), ``history`` (gradient norms, or actions in action
    mode) and ``gradient_norm``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    F = _hamiltonian(profile, spec)
    model = loop.model
    z, eta = loop.z.copy(), loop.eta
    norm = gradient_norm(loop, F)
    history = [norm if mode == "residual" else action(loop, F)]
    steps = 0
    if mode == "residual":
        res = _residual_vector(F, model, z, eta)
        mu = 1e-3
        while norm > tol and steps < max_steps and mu < 1e12:
            J = _residual_jacobian(F, model, z, eta)
            JtJ = J.T @ J
            g = J.T @ res
            dvec = np.linalg.solve(JtJ + mu * (np.diag(np.diag(JtJ)) + np.eye(len(g))), -g)
            z_new = z + dvec[:-1].reshape(z.shape)
            eta_new = eta + dvec[-1]
            res_new = _residual_vector(F, model, z_new, eta_new)
            if np.all(np.isfinite(res_new)) and np.linalg.norm(res_new) < np.linalg.norm(res):
                z, eta, res = z_new, eta_new, res_new
                norm = float(np.linalg.norm(res))
                history.append(norm)
                steps += 1
                mu = max(mu / 3, 1e-12)
            else:
                mu *= 4
    elif mode == "action":
        A = history[0]
        while norm > tol and steps < max_steps:
            g = gradient(Loop(model, z, eta), F)
            d_z = -g.loop_part @ model.omega.T
            d_eta = g.eta_part
            slope = -(np.sum(d_z**2) / len(z) + d_eta**2) / F.kappa
            s = 1.0
            while s > 1e-14:
                try:
                    trial = Loop(model, z + s * d_z, eta + s * d_eta)
                    A_new = action(trial, F)
                except DomainError:
                    A_new = np.inf
                if A_new <= A + 1e-4 * s * slope:
                    break
                s *= 0.5
            else:
                break
            z, eta, A = trial.z, trial.eta, A_new
            norm = gradient_norm(trial, F)
            history.append(A)
            steps += 1
    else:
        raise ValueError(f"unknown descent mode {mode!r}")
    out = Loop(model, z, eta, dict(loop.meta))
    out.meta.update(converged=bool(norm <= tol), steps=steps, history=history, gradient_norm=norm, mode=mode)
    log.debug("descend(%s): %d steps, |grad| %.3e", mode, steps, norm)
    return out


def _shooting(F, z0, eta, variational=True, tol=1e-12):
    fl = lifted_flow(F, z0[None], eta, variational=variational, tol=tol)
    return fl


def refine_newton(loop, profile, spec=None, tol=1e-10, max_iter=40, max_drift=0.2, integrate_tol=1e-12):
    """Single-shooting Newton on ``(u(0), eta)`` for ``u' = eta X_F``, ``F_eta(u(1)) = 0``.

    For autonomous Hamiltonians the time-shift degeneracy is removed by a
    phase row ``<X_F(u0), du0> = 0``.  The solve is a least-squares one, so
    further Morse-Bott directions are handled by the minimum-norm step.

    Returns ``(loop, converged)``.  A solution whose ``eta`` moved more than
    ``max_drift`` from the guess is reported as not converged.  The returned
    loop is resampled from the integrated trajectory; ``meta`` holds the
    shooting ``residual``, the ``action`` from quadrature along the
    trajectory and ``r_min`` / ``r_max``.
    """
    F = _hamiltonian(profile, spec)
    model = loop.model
    n = model.omega.shape[0]
    z0 = loop.z[0].copy()
    eta0 = eta = loop.eta
    autonomous = bool(getattr(F.spec, "autonomous", False)) if hasattr(F, "spec") else False
    res_norm = np.inf
    try:
        for _ in range(max_iter):
            fl = _shooting(F, z0, eta, tol=integrate_tol)
            z1 = fl.z_end[0]
            x1, r1 = model.from_canonical(z1[None])
            res = np.r_[model.canonical_difference(z0, z1), F.value(x1, r1, eta)[0]]
            res_norm = float(np.linalg.norm(res))
            if res_norm <= tol:
                break
            Phi, w = fl.phi[0], fl.w[0]
            gF = canonical_gradient(F, z1[None], eta)[0]
            Fdot = F.d_t(x1, r1, eta)[0]
            J = np.zeros((n + 1, n + 1))
            J[:n, :n] = Phi - np.eye(n)
            J[:n, n] = w
            J[n, :n] = gF @ Phi
            J[n, n] = gF @ w + Fdot
            rhs = -res
            if autonomous:
                X0 = canonical_field(F, z0[None], 0.0)[0]
                J = np.vstack([J, np.r_[X0, 0.0]])
                rhs = np.r_[rhs, 0.0]
            delta = np.linalg.lstsq(J, rhs, rcond=None)[0]
            size = np.linalg.norm(delta)
            if size > 0.5:
                delta *= 0.5 / size
            z0 = z0 + delta[:n]
            eta = eta + delta[n]
            if not np.all(np.isfinite(z0)) or model.from_canonical(z0[None])[1][0] <= 0:
                raise FlowError("Newton iterate left the cone", diagnostics={"eta": eta})
    except FlowError as exc:
        log.debug("refine_newton failed: %s", exc)
        out = loop.copy()
        out.meta.update(converged=False, residual=np.inf, reason=str(exc))
        return out, False
    N = loop.N
    fl = lifted_flow(F, z0[None], eta, quadrature=True, s_eval=np.arange(N) / N, tol=integrate_tol)
    zs = fl.states[:, 0, :]
    r = model.from_canonical(zs)[1]
    converged = bool(res_norm <= tol and abs(eta - eta0) <= max_drift)
    meta = dict(
        converged=converged,
        residual=res_norm,
        action=float((fl.lam[0] - eta * fl.ham[0]) / F.kappa),
        r_min=float(r.min()),
        r_max=float(r.max()),
        drift=float(abs(eta - eta0)),
    )
    try:
        out = Loop(model, zs, eta, meta)
    except DomainError:
        out = loop.copy()
        out.meta.update(meta, converged=False)
        return out, False
    return out, converged


def seed_loop(F, x0, r0, eta, N=256, tol=1e-11):
    """Loop sampled from the flow of ``X_F`` through ``(x0, r0)`` over multiplier ``eta``."""
    model = F.model
    z0 = model.to_canonical(np.atleast_2d(x0), r0)
    fl = lifted_flow(F, z0, eta, s_eval=np.arange(N) / N, tol=tol)
    return Loop(model, fl.states[:, 0, :], eta)


@dataclass
class ProbeResult:
    epsilon: float
    samples: int
    min_gradient: float
    max_gradient: float


def fundamental_lemma_probe(loop, profile, spec=None, n_samples=200, radius=0.05, rng=None):
    """Empirical largest ``eps`` with ``|grad A| < eps  =>  |eta| <= (A + 1) / eps`` near ``loop``.

    Samples random perturbations of the loop nodes and multiplier of size
    up to ``radius`` and scans the resulting ``(|grad A|, A, eta)`` triples.
    """
    F = _hamiltonian(profile, spec)
    rng = np.random.default_rng(0) if rng is None else rng
    g, bounds = [], []
    for _ in range(n_samples):
        amp = radius * rng.random()
        dz = rng.standard_normal(loop.z.shape)
        dz *= amp / max(np.sqrt(np.mean(np.sum(dz**2, axis=1))), 1e-300)
        deta = amp * rng.uniform(-1, 1)
        try:
            trial = Loop(loop.model, loop.z + dz, loop.eta + deta)
        except DomainError:
            continue
        A = action(trial, F)
        gn = gradient_norm(trial, F)
        e = abs(trial.eta)
        if A + 1 < 0:
            b = 0.0
        else:
            b = np.inf if e == 0 else (A + 1) / e
        g.append(gn)
        bounds.append(b)
    g = np.asarray(g)
    bounds = np.asarray(bounds)
    order = np.argsort(g)
    g, bounds = g[order], bounds[order]
    best = g[0] if len(g) else np.inf
    running = np.inf
    for j in range(len(g)):
        running = min(running, bounds[j])
        if running <= g[j]:
            break
        upper = g[j + 1] if j + 1 < len(g) else np.inf
        best = max(best, min(upper, running))
    return ProbeResult(
        epsilon=float(best),
        samples=int(len(g)),
        min_gradient=float(g.min()) if len(g) else np.nan,
        max_gradient=float(g.max()) if len(g) else np.nan,
    )
