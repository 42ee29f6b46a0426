"""The cone ``Sigma x (0, inf)`` with ``lambda = r alpha``, Hamiltonian lifts and flows.

Cone functions are objects with vectorized methods ``value``, ``d_r``,
``d_x`` and ``d_t`` taking ``(x, r, t)`` batches, plus ``model`` and
``kappa`` attributes.  Vector fields are computed in the model's canonical
coordinates from ``omega(X_F, .) = -dF``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import FD_STEP, cone_gradient, flow_batch
from .integrate import integrate


@dataclass(frozen=True)
class ConePoint:
    """A point ``(x, r)`` of the cone over ``Sigma``."""

    x: np.ndarray
    r: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        r = float(self.r)
        if not (np.isfinite(r) and r > 0):
            raise DomainError(f"cone point needs r > 0, got {r}")
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class ConeTangent:
    """Tangent vector ``dx + dr d/dr`` in chart coordinates."""

    dx: np.ndarray
    dr: float
    one_sided: bool = False


def _bx(model, x, r, t):
    x = model.as_batch(x)
    r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
    t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
    return x, r, t


class ConeFunction:
    """Base class for time-dependent functions on the cone."""

    model = None
    kappa = 0.0

    def value(self, x, r, t):
        raise NotImplementedError

    def d_r(self, x, r, t):
        raise NotImplementedError

    def d_x(self, x, r, t):
        raise NotImplementedError

    def d_t(self, x, r, t):
        raise NotImplementedError

    def kinks(self):
        """Radii where ``d_r`` is only one-sided."""
        return ()

    def at(self, z, t):
        x, r = self.model.from_canonical(z)
        return self.value(x, r, t)


class LiftedHamiltonian(ConeFunction):
    """``H_t(x, r) = r h_t(x) - shift`` generating the lift of the contact path."""

    def __init__(self, spec, shift=0.0):
        self.spec = spec
        self.model = spec.model
        self.kappa = float(shift)

    def value(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return r * self.spec.value(x, t) - self.kappa

    def d_r(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return self.spec.value(x, t).copy()

    def d_x(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return r[:, None] * self.spec.grad(x, t)

    def d_t(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return r * self.spec.dt(x, t)


class RadialFunction(ConeFunction):
    """Autonomous ``F(r)`` given with its derivative."""

    def __init__(self, model, f, df, kappa=0.0):
        self.model = model
        self.f = f
        self.df = df
        self.kappa = float(kappa)

    def value(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return np.asarray(self.f(r), dtype=float) + 0 * r

    def d_r(self, x, r, t):
        x, r, t = _bx(self.model, x, r, t)
        return np.asarray(self.df(r), dtype=float) + 0 * r

    def d_x(self, x, r, t):
        return np.zeros_like(self.model.as_batch(x))

    def d_t(self, x, r, t):
        return np.zeros(len(self.model.as_batch(x)))


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------


def canonical_gradient(F, z, t):
    model = F.model
    z = np.atleast_2d(z)
    x, r = model.from_canonical(z)
    return cone_gradient(model, z, F.d_r(x, r, t), F.d_x(x, r, t))


def canonical_field(F, z, t):
    """``X_F`` at canonical points ``z`` (shape ``(B, 2k)``)."""
    return canonical_gradient(F, z, t) @ F.model.omega_inv.T


def canonical_field_jacobian(F, z, t):
    """Central-difference Jacobian ``DX_F`` with respect to ``z``."""
    z = np.atleast_2d(z)
    B, n = z.shape
    J = np.empty((B, n, n))
    for j in range(n):
        step = FD_STEP * np.maximum(1.0, np.abs(z[:, j]))
        e = np.zeros((B, n))
        e[:, j] = step
        J[:, :, j] = (canonical_field(F, z + e, t) - canonical_field(F, z - e, t)) / (2 * step[:, None])
    return J


def hamiltonian_vector_field(F, t, p):
    """``X_F`` at a cone point, returned in ``(dx, dr)`` chart components.

    At radii where ``F`` is only piecewise smooth the right-hand derivative
    is used and ``one_sided`` is set.
    """
    model = F.model
    z = model.to_canonical(p.x[None, :], p.r)
    X = canonical_field(F, z, t)
    dx = np.einsum("bai,bi->ba", model.dx_dz(z), X)[0]
    dr = float(model.grad_r(z)[0] @ X[0])
    one_sided = any(abs(p.r - k) < 1e-12 for k in F.kinks())
    return ConeTangent(dx=dx, dr=dr, one_sided=one_sided)


def liouville_pairing(F, z, t):
    """``lambda(X_F)`` at canonical points."""
    z = np.atleast_2d(z)
    return np.einsum("bi,bi->b", F.model.liouville(z), canonical_field(F, z, t))


def liouville_defect(F, x, r, t):
    """``lambda(X_F) - F - kappa`` at cone points (zero wherever ``F + kappa`` is 1-homogeneous)."""
    model = F.model
    x, r, t = _bx(model, x, r, t)
    z = model.to_canonical(x, r)
    return liouville_pairing(F, z, t) - F.value(x, r, t) - F.kappa


def verify_liouville_identity(F, samples):
    """Max of ``|lambda(X_F) - F - kappa|`` over ``samples = (x, r, t)``."""
    x, r, t = samples
    return float(np.max(np.abs(liouville_defect(F, x, r, t))))


def omega_residual(F, x, r, t, eps=1e-6):
    """Max of ``|omega(X_F, v) + dF(v)|`` over coordinate directions ``v`` (finite-difference ``dF``)."""
    model = F.model
    x, r, t = _bx(model, x, r, t)
    z = model.to_canonical(x, r)
    X = canonical_field(F, z, t)
    worst = 0.0
    for j in range(z.shape[1]):
        e = np.zeros(z.shape[1])
        e[j] = eps
        dF = (F.at(z + e, t) - F.at(z - e, t)) / (2 * eps)
        om = X @ model.omega[:, j]
        worst = max(worst, float(np.max(np.abs(om + dF))))
    return worst


# ---------------------------------------------------------------------------
# flows on the cone
# ---------------------------------------------------------------------------


@dataclass
class LiftedFlow:
    """Batched result of :func:`lifted_flow`.

    ``lam`` and ``ham`` are the integrals of ``lambda(dz/ds)`` and of
    ``F(z(s), t0 + eta s)`` over ``s in [0, 1]``.
    """

    z_end: np.ndarray
    states: np.ndarray | None = None
    phi: np.ndarray | None = None
    w: np.ndarray | None = None
    lam: np.ndarray | None = None
    ham: np.ndarray | None = None


def lifted_flow(F, z0, eta, *, t0=0.0, variational=False, quadrature=False, s_eval=None, tol=1e-11):
    """Integrate ``dz/ds = eta X_F(z, t0 + eta s)`` for ``s in [0, 1]``.

    ``eta`` may differ per row.  With ``variational`` the derivative ``phi``
    of ``z(1)`` with respect to ``z0`` and the derivative ``w`` with respect
    to ``eta`` are returned as well.
    """
    model = F.model
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    B, n = z0.shape
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (B,)).copy()
    t0 = np.broadcast_to(np.asarray(t0, dtype=float), (B,)).copy()
    nq = 2 if quadrature else 0
    spec = getattr(F, "spec", None)
    autonomous = spec is not None and bool(getattr(spec, "autonomous", False))

    def rhs(s, y):
        z = y[:, :n]
        tau = t0 + eta * s
        X = canonical_field(F, z, tau)
        dz = eta[:, None] * X
        out = [dz]
        if variational:
            DX = canonical_field_jacobian(F, z, tau)
            Phi = y[:, n : n + n * n].reshape(B, n, n)
            w = y[:, n + n * n : n + n * n + n]
            if autonomous:
                dXdt = 0.0
            else:
                dt = 1e-6
                dXdt = (canonical_field(F, z, tau + dt) - canonical_field(F, z, tau - dt)) / (2 * dt)
            out.append((eta[:, None, None] * DX @ Phi).reshape(B, n * n))
            out.append(X + (eta * s)[:, None] * dXdt + eta[:, None] * np.einsum("bij,bj->bi", DX, w))
        if quadrature:
            lam = np.einsum("bi,bi->b", model.liouville(z), dz)
            out.append(np.column_stack([lam, F.at(z, tau)]))
        return np.hstack(out)

    parts = [z0]
    if variational:
        parts += [np.broadcast_to(np.eye(n).ravel(), (B, n * n)), np.zeros((B, n))]
    if quadrature:
        parts.append(np.zeros((B, nq)))
    width = n + (n * n + n if variational else 0) + nq
    controlled = np.r_[np.arange(n), np.arange(width - nq, width)]
    y1, ys = integrate(rhs, np.hstack(parts), 0.0, 1.0, tol=tol, t_eval=s_eval, error_index=controlled)
    res = LiftedFlow(z_end=y1[:, :n])
    if ys is not None:
        res.states = ys[:, :, :n]
    if variational:
        res.phi = y1[:, n : n + n * n].reshape(B, n, n)
        res.w = y1[:, n + n * n : n + n * n + n]
    if quadrature:
        res.lam = y1[:, -2]
        res.ham = y1[:, -1]
    return res


def lift_point(spec, t, p, tol=1e-11):
    """Image of ``p`` under the lifted map ``(x, r) -> (phi_t(x), r / rho_t(x))``."""
    model = spec.model
    x = model.check(p.x)
    if t == 0:
        return ConePoint(x[0].copy(), p.r)
    x_end, rho, _, _ = flow_batch(model, spec, x, t, tol=tol)
    return ConePoint(x_end[0], p.r / rho[0])


def pullback_residual(spec, t, points, r, eps=1e-6, tol=1e-12, reduce=True):
    """Max of ``|lift^* lambda - lambda|`` over points of ``Sigma`` at heights ``r`` after times ``t``.

    ``t`` and ``r`` may be scalars or per-point arrays; with ``reduce=False``
    the per-point maxima are returned.
    The pullback is formed from a central-difference Jacobian of the lifted
    time-``t`` map in canonical coordinates and compared on coordinate
    directions.
    """
    model = spec.model
    x = model.check(points)
    F = LiftedHamiltonian(spec)
    z = model.to_canonical(x, r)
    n = z.shape[1]
    base = lifted_flow(F, z, t, tol=tol).z_end
    lam_end = model.liouville(base)
    worst = np.zeros(len(z))
    for j in range(n):
        e = np.zeros(n)
        e[j] = eps * max(1.0, float(np.max(np.abs(z[:, j]))))
        zp = lifted_flow(F, z + e, t, tol=tol).z_end
        zm = lifted_flow(F, z - e, t, tol=tol).z_end
        col = (zp - zm) / (2 * e[j])
        pulled = np.einsum("bi,bi->b", lam_end, col)
        worst = np.maximum(worst, np.abs(pulled - model.liouville(z)[:, j]))
    return float(worst.max()) if reduce else worst
