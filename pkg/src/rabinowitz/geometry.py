"""Coordinatized contact manifolds, contact Hamiltonian flows and the conformal factor.

Every model embeds the cone ``Sigma x (0, inf)`` into an exact symplectic
vector space (or cotangent bundle) with constant symplectic matrix ``omega``
and linear Liouville form, so that ``lambda = r * alpha`` pulls back to the
standard form.  Points of ``Sigma`` are stored as arrays of *ambient*
coordinates; coordinates flagged periodic live in ``[0, 1)``.

======================  =====================  ===================================
model                   points of Sigma        canonical coordinates of the cone
======================  =====================  ===================================
``Circle``              ``x`` in R/Z           ``(q, P) = (x, r)``
``FlatTorusUnitCot..``  ``(q, p)``, ``|p|=1``  ``(q, P) = (q, r p)``
``EllipsoidBoundary``   ``z`` with ``Q(z)=1``  ``sqrt(r) z``
======================  =====================  ===================================
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, UnsupportedModelError
from .integrate import integrate

FD_STEP = 1e-6


def _wrap(d):
    return d - np.floor(d + 0.5)


class ContactModel:
    """Base class; subclasses fill in the chart and cone embedding."""

    name: str
    dim: int
    ambient: int
    half: int
    omega: np.ndarray
    periodic: np.ndarray
    canonical_periodic: np.ndarray

    @property
    def omega_inv(self):
        return np.linalg.inv(self.omega)

    # -- chart -----------------------------------------------------------
    def as_batch(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.ambient:
            raise DomainError(
                f"{self.name}: expected {self.ambient} coordinates, got {x.shape[-1]}"
            )
        return x

    def normalize(self, x):
        raise NotImplementedError

    def check(self, x, tol=1e-6):
        """Raise :class:`DomainError` unless every row of ``x`` lies on Sigma."""
        x = self.as_batch(x)
        if not np.all(np.isfinite(x)):
            raise DomainError(f"{self.name}: non-finite coordinates")
        bad = np.abs(self.constraint(x)) > tol
        if np.any(bad):
            raise DomainError(f"{self.name}: {int(bad.sum())} point(s) off the manifold")
        return x

    def constraint(self, x):
        return np.zeros(len(x))

    def difference(self, x, y):
        """Displacement ``y - x`` on the quotient (periodic coordinates wrapped)."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return np.where(self.periodic, _wrap(d), d)

    def distance(self, x, y):
        return np.linalg.norm(self.difference(x, y), axis=-1)

    def canonical_difference(self, z0, z1):
        d = np.asarray(z1, dtype=float) - np.asarray(z0, dtype=float)
        return np.where(self.canonical_periodic, _wrap(d), d)

    def retract(self, x, v):
        return self.normalize(np.asarray(x) + v)

    # -- contact structure -----------------------------------------------
    def alpha(self, x):
        """Contact form as an ambient covector, shape ``(B, ambient)``."""
        raise NotImplementedError

    def dalpha(self, x):
        raise NotImplementedError

    def reeb(self, x):
        raise NotImplementedError

    # -- cone embedding --------------------------------------------------
    def to_canonical(self, x, r):
        raise NotImplementedError

    def from_canonical(self, z):
        raise NotImplementedError

    def grad_r(self, z):
        raise NotImplementedError

    def dx_dz(self, z):
        raise NotImplementedError

    def liouville(self, z):
        raise NotImplementedError

    def liouville_field(self, z):
        """Vector field ``V`` with ``omega(V, .) = lambda`` (equals ``r d/dr``)."""
        lam = self.liouville(z)
        return -lam @ np.linalg.inv(self.omega).T

    def tangent_basis(self, x):
        raise NotImplementedError

    def canonical_tangent(self, x):
        """Derivative of ``x -> to_canonical(x, 1)`` along the tangent basis."""
        raise NotImplementedError

    # -- sampling --------------------------------------------------------
    def chart_dims(self, per_dim):
        per = np.broadcast_to(np.atleast_1d(np.asarray(per_dim, dtype=int)), (self.dim,))
        if np.any(per < 1):
            raise ValueError("seed counts must be positive")
        return tuple(int(p) for p in per)

    def seed_points(self, per_dim):
        raise NotImplementedError

    def link_radius(self, per_dim):
        raise NotImplementedError

    def link_distance(self, x, y, per_dim):
        """Distance scaled so that neighbouring seeds of a ``per_dim`` grid are linked at 1."""
        return self.distance(x, y) / self.link_radius(per_dim)

    def sample(self, rng, n):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))

    def _key(self):
        return ()


class Circle(ContactModel):
    """``S^1 = R/Z`` with contact form ``dx``."""

    name = "circle"
    dim = 1
    ambient = 1
    half = 1

    def __init__(self):
        self.omega = np.array([[0.0, -1.0], [1.0, 0.0]])
        self.periodic = np.array([True])
        self.canonical_periodic = np.array([True, False])

    def __repr__(self):
        return "Circle()"

    def normalize(self, x):
        return np.mod(x, 1.0)

    def dalpha(self, x):
        return np.zeros((len(self.as_batch(x)), 1, 1))

    def reeb(self, x):
        return np.ones((len(self.as_batch(x)), 1))

    def to_canonical(self, x, r):
        x = self.as_batch(x)
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
        return np.column_stack([x[:, 0], r])

    def from_canonical(self, z):
        z = np.atleast_2d(z)
        return np.mod(z[:, :1], 1.0), z[:, 1].copy()

    def grad_r(self, z):
        g = np.zeros_like(np.atleast_2d(z))
        g[:, 1] = 1.0
        return g

    def dx_dz(self, z):
        z = np.atleast_2d(z)
        d = np.zeros((len(z), 1, 2))
        d[:, 0, 0] = 1.0
        return d

    def liouville(self, z):
        z = np.atleast_2d(z)
        return np.column_stack([z[:, 1], np.zeros(len(z))])

    def tangent_basis(self, x):
        return np.ones((len(self.as_batch(x)), 1, 1))

    def canonical_tangent(self, x):
        t = np.zeros((len(self.as_batch(x)), 2, 1))
        t[:, 0, 0] = 1.0
        return t

    def alpha(self, x):
        return np.ones((len(self.as_batch(x)), 1))

    def seed_points(self, per_dim):
        (n,) = self.chart_dims(per_dim)
        return (np.arange(n) / n)[:, None]

    def link_radius(self, per_dim):
        (n,) = self.chart_dims(per_dim)
        return 1.5 / n

    def sample(self, rng, n):
        return rng.random((n, 1))


class FlatTorusUnitCotangent(ContactModel):
    """Unit cotangent bundle of the flat torus ``R^d / Z^d``; ``alpha = p . dq``.

    Points are ``(q, p)`` with ``q`` periodic and ``p`` a Euclidean unit
    covector. The Reeb flow is the unit-speed geodesic flow.
    """

    name = "flat-torus"

    def __init__(self, dim=2):
        d = int(dim)
        if d < 2:
            raise ValueError("flat torus unit cotangent bundle needs dim >= 2")
        self.d = d
        self.dim = 2 * d - 1
        self.ambient = 2 * d
        self.half = d
        eye = np.eye(d)
        zero = np.zeros((d, d))
        self.omega = np.block([[zero, -eye], [eye, zero]])
        self.periodic = np.r_[np.ones(d, bool), np.zeros(d, bool)]
        self.canonical_periodic = self.periodic.copy()

    def __repr__(self):
        return f"FlatTorusUnitCotangent(dim={self.d})"

    def _key(self):
        return (self.d,)

    def constraint(self, x):
        return np.linalg.norm(x[:, self.d:], axis=1) - 1.0

    def normalize(self, x):
        x = np.array(x, dtype=float)
        x = x[None] if x.ndim == 1 else x
        q = np.mod(x[:, : self.d], 1.0)
        p = x[:, self.d:] / np.linalg.norm(x[:, self.d:], axis=1, keepdims=True)
        return np.hstack([q, p])

    def dalpha(self, x):
        n = len(self.as_batch(x))
        d = self.d
        m = np.zeros((n, 2 * d, 2 * d))
        for j in range(d):
            m[:, d + j, j] = 1.0
            m[:, j, d + j] = -1.0
        return m

    def reeb(self, x):
        x = self.as_batch(x)
        p = x[:, self.d:] / np.linalg.norm(x[:, self.d:], axis=1, keepdims=True)
        return np.hstack([p, np.zeros_like(p)])

    def to_canonical(self, x, r):
        x = self.as_batch(x)
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
        p = x[:, self.d:] / np.linalg.norm(x[:, self.d:], axis=1, keepdims=True)
        return np.hstack([x[:, : self.d], r[:, None] * p])

    def from_canonical(self, z):
        z = np.atleast_2d(z)
        P = z[:, self.d:]
        r = np.linalg.norm(P, axis=1)
        return np.hstack([np.mod(z[:, : self.d], 1.0), P / r[:, None]]), r

    def grad_r(self, z):
        z = np.atleast_2d(z)
        P = z[:, self.d:]
        g = np.zeros_like(z)
        g[:, self.d:] = P / np.linalg.norm(P, axis=1, keepdims=True)
        return g

    def dx_dz(self, z):
        z = np.atleast_2d(z)
        d = self.d
        P = z[:, d:]
        r = np.linalg.norm(P, axis=1)
        p = P / r[:, None]
        out = np.zeros((len(z), 2 * d, 2 * d))
        out[:, :d, :d] = np.eye(d)
        out[:, d:, d:] = (np.eye(d) - p[:, :, None] * p[:, None, :]) / r[:, None, None]
        return out

    def liouville(self, z):
        z = np.atleast_2d(z)
        return np.hstack([z[:, self.d:], np.zeros((len(z), self.d))])

    def _sphere_basis(self, p):
        p = p / np.linalg.norm(p, axis=1, keepdims=True)
        if self.d == 2:
            return np.stack([-p[:, 1], p[:, 0]], axis=1)[:, :, None]
        mats = np.concatenate([p[:, :, None], np.broadcast_to(np.eye(self.d), (len(p), self.d, self.d))], axis=2)
        q, _ = np.linalg.qr(mats)
        return q[:, :, 1 : self.d]

    def tangent_basis(self, x):
        x = self.as_batch(x)
        d = self.d
        n = len(x)
        out = np.zeros((n, 2 * d, 2 * d - 1))
        out[:, :d, :d] = np.eye(d)
        out[:, d:, d:] = self._sphere_basis(x[:, d:])
        return out

    def canonical_tangent(self, x):
        return self.tangent_basis(x)

    def alpha(self, x):
        x = self.as_batch(x)
        return np.hstack([x[:, self.d:], np.zeros((len(x), self.d))])

    def sphere_points(self, n):
        if self.d == 2:
            ang = 2 * np.pi * np.arange(n) / n
            return np.column_stack([np.cos(ang), np.sin(ang)])
        if self.d == 3:
            i = np.arange(n) + 0.5
            phi = np.arccos(1 - 2 * i / n)
            theta = np.pi * (1 + 5 ** 0.5) * i
            return np.column_stack(
                [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)]
            )
        g = np.random.default_rng(0).standard_normal((n, self.d))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def seed_points(self, per_dim):
        per = self.chart_dims(per_dim)
        d = self.d
        axes = [np.arange(n) / n for n in per[:d]]
        qs = np.array(list(itertools.product(*axes)))
        ps = self.sphere_points(int(np.prod(per[d:])))
        return np.array([np.r_[q, p] for q in qs for p in ps])

    def link_radius(self, per_dim):
        per = self.chart_dims(per_dim)
        d = self.d
        q_step = max(1.0 / n for n in per[:d])
        n_s = int(np.prod(per[d:]))
        p_step = 2 * math.sin(math.pi / n_s) if d == 2 else 4.0 / math.sqrt(n_s)
        return 1.5 * max(q_step, p_step)

    def link_distance(self, x, y, per_dim):
        per = self.chart_dims(per_dim)
        d = self.d
        diff = self.difference(x, y)
        q_rad = 1.5 * max(1.0 / n for n in per[:d])
        n_s = int(np.prod(per[d:]))
        p_rad = 1.5 * (2 * math.sin(math.pi / n_s) if d == 2 else 4.0 / math.sqrt(n_s))
        dq = np.linalg.norm(diff[..., :d], axis=-1) / q_rad
        dp = np.linalg.norm(diff[..., d:], axis=-1) / p_rad
        return np.maximum(dq, dp)

    def sample(self, rng, n):
        q = rng.random((n, self.d))
        p = rng.standard_normal((n, self.d))
        p /= np.linalg.norm(p, axis=1, keepdims=True)
        return np.hstack([q, p])


class EllipsoidBoundary(ContactModel):
    """Boundary of the ellipsoid ``sum (x_j^2 + y_j^2) / a_j^2 <= 1`` in ``C^n``.

    Contact form is the restriction of ``(x dy - y dx) / 2``; ambient
    coordinates are ordered ``(x_1..x_n, y_1..y_n)``.
    """

    name = "ellipsoid"

    def __init__(self, radii=(1.0, 1.0)):
        a = np.asarray(radii, dtype=float).ravel()
        if a.size < 1 or np.any(a <= 0):
            raise ValueError("ellipsoid radii must be positive")
        self.radii = a
        n = a.size
        self.half = n
        self.ambient = 2 * n
        self.dim = 2 * n - 1
        self._w = np.r_[1 / a**2, 1 / a**2]
        eye = np.eye(n)
        zero = np.zeros((n, n))
        self.omega = np.block([[zero, eye], [-eye, zero]])
        self.periodic = np.zeros(2 * n, bool)
        self.canonical_periodic = self.periodic.copy()

    def __repr__(self):
        return f"EllipsoidBoundary(radii={tuple(self.radii.tolist())})"

    def _key(self):
        return tuple(self.radii.tolist())

    def Q(self, z):
        return np.sum(self._w * np.atleast_2d(z) ** 2, axis=1)

    def constraint(self, x):
        return self.Q(x) - 1.0

    def normalize(self, x):
        x = np.array(x, dtype=float)
        x = x[None] if x.ndim == 1 else x
        return x / np.sqrt(self.Q(x))[:, None]

    def dalpha(self, x):
        return np.broadcast_to(self.omega, (len(self.as_batch(x)),) + self.omega.shape).copy()

    def reeb(self, x):
        x = self.normalize(self.as_batch(x))
        return (2 * self._w * x) @ np.linalg.inv(self.omega).T

    def to_canonical(self, x, r):
        x = self.as_batch(x)
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
        return x * np.sqrt(r / self.Q(x))[:, None]

    def from_canonical(self, z):
        z = np.atleast_2d(z)
        r = self.Q(z)
        return z / np.sqrt(r)[:, None], r

    def grad_r(self, z):
        return 2 * self._w * np.atleast_2d(z)

    def dx_dz(self, z):
        z = np.atleast_2d(z)
        q = self.Q(z)
        gq = 2 * self._w * z
        eye = np.eye(self.ambient)
        return eye / np.sqrt(q)[:, None, None] - z[:, :, None] * gq[:, None, :] / (2 * q[:, None, None] ** 1.5)

    def liouville(self, z):
        z = np.atleast_2d(z)
        n = self.half
        return 0.5 * np.hstack([-z[:, n:], z[:, :n]])

    def tangent_basis(self, x):
        x = self.as_batch(x)
        g = self._w * x
        g = g / np.linalg.norm(g, axis=1, keepdims=True)
        mats = np.concatenate(
            [g[:, :, None], np.broadcast_to(np.eye(self.ambient), (len(x), self.ambient, self.ambient))],
            axis=2,
        )
        q, _ = np.linalg.qr(mats)
        return q[:, :, 1 : self.ambient]

    def canonical_tangent(self, x):
        return self.tangent_basis(x)

    def alpha(self, x):
        return self.liouville(self.as_batch(x))

    def seed_points(self, per_dim):
        n = int(np.prod(self.chart_dims(per_dim)))
        g = np.random.default_rng(0).standard_normal((n, self.ambient))
        return self.normalize(g)

    def link_radius(self, per_dim):
        n = int(np.prod(self.chart_dims(per_dim)))
        return 3.0 * float(self.radii.max()) * n ** (-1.0 / self.dim)

    def sample(self, rng, n):
        return self.normalize(rng.standard_normal((n, self.ambient)))


MODELS = {
    "circle": lambda **kw: Circle(),
    "flat-torus": lambda dim=2, **kw: FlatTorusUnitCotangent(dim),
    "ellipsoid": lambda radii=(1.0, 1.0), **kw: EllipsoidBoundary(radii),
}


# ---------------------------------------------------------------------------
# contact Hamiltonians
# ---------------------------------------------------------------------------


def _batch_xt(model, x, t):
    x = model.as_batch(x)
    t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
    return x, t


@dataclass(frozen=True, eq=False)
class IsotopySpec:
    """A contact Hamiltonian ``h_t`` on ``model`` generating the path ``phi_t``.

    Callables take ``x`` of shape ``(B, ambient)`` and ``t`` of shape ``(B,)``
    and must be vectorized over the batch axis. ``dh_dx`` returns the ambient
    gradient; only its tangential part is used.
    """

    model: ContactModel
    h: Callable
    dh_dx: Optional[Callable] = None
    dh_dt: Optional[Callable] = None
    autonomous: bool = False
    periodic: bool = True
    name: str = "custom"
    params: Mapping = field(default_factory=dict)

    def value(self, x, t):
        x, t = _batch_xt(self.model, x, t)
        return np.broadcast_to(np.asarray(self.h(x, t), dtype=float), (len(x),))

    def grad(self, x, t):
        x, t = _batch_xt(self.model, x, t)
        if self.dh_dx is not None:
            return np.broadcast_to(np.asarray(self.dh_dx(x, t), dtype=float), x.shape)
        warnings.warn(f"{self.name}: dh_dx missing, using central differences", stacklevel=2)
        g = np.empty_like(x)
        for j in range(x.shape[1]):
            e = np.zeros(x.shape[1])
            e[j] = FD_STEP
            g[:, j] = (self.h(x + e, t) - self.h(x - e, t)) / (2 * FD_STEP)
        return g

    def dt(self, x, t):
        x, t = _batch_xt(self.model, x, t)
        if self.dh_dt is not None:
            return np.broadcast_to(np.asarray(self.dh_dt(x, t), dtype=float), (len(x),))
        if self.autonomous:
            return np.zeros(len(x))
        warnings.warn(f"{self.name}: dh_dt missing, using central differences", stacklevel=2)
        return (self.h(x, t + FD_STEP) - self.h(x, t - FD_STEP)) / (2 * FD_STEP)


def constant(model, c):
    c = float(c)
    return IsotopySpec(
        model,
        h=lambda x, t: np.full(len(x), c),
        dh_dx=lambda x, t: np.zeros_like(x),
        dh_dt=lambda x, t: np.zeros(len(x)),
        autonomous=True,
        name="constant",
        params={"value": c},
    )


def sinusoidal(model, offset=1.0, amplitude=0.0, k=None, omega=0.0, phase=0.0):
    """``h = offset + amplitude * sin(2 pi (k . x + omega t) + phase)``."""
    k = np.zeros(model.ambient) if k is None else np.asarray(k, dtype=float).ravel()
    if k.size != model.ambient:
        raise ValueError(f"wave vector needs {model.ambient} entries")
    kp = k[model.periodic]
    if np.any(np.abs(kp - np.round(kp)) > 1e-12):
        raise ValueError("wave vector must be integral along periodic coordinates")
    offset, amplitude, omega, phase = map(float, (offset, amplitude, omega, phase))
    tau = 2 * np.pi

    def arg(x, t):
        return tau * (x @ k + omega * t) + phase

    return IsotopySpec(
        model,
        h=lambda x, t: offset + amplitude * np.sin(arg(x, t)),
        dh_dx=lambda x, t: (amplitude * tau * np.cos(arg(x, t)))[:, None] * k,
        dh_dt=lambda x, t: amplitude * tau * omega * np.cos(arg(x, t)),
        autonomous=(omega == 0.0 or amplitude == 0.0),
        name="sinusoidal",
        params={"offset": offset, "amplitude": amplitude, "k": k.tolist(), "omega": omega, "phase": phase},
    )


def kinetic_energy(model, weights=None, scale=1.0):
    """``h(q, p) = scale * sum(w_j p_j^2) / 2`` on a flat torus unit cotangent bundle."""
    if not isinstance(model, FlatTorusUnitCotangent):
        raise UnsupportedModelError("kinetic-energy Hamiltonian needs a flat-torus model")
    d = model.d
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != d:
        raise ValueError(f"kinetic-energy needs {d} weights")
    scale = float(scale)

    def grad(x, t):
        g = np.zeros_like(x)
        g[:, d:] = scale * w * x[:, d:]
        return g

    return IsotopySpec(
        model,
        h=lambda x, t: 0.5 * scale * np.sum(w * x[:, d:] ** 2, axis=1),
        dh_dx=grad,
        dh_dt=lambda x, t: np.zeros(len(x)),
        autonomous=True,
        name="kinetic-energy",
        params={"weights": w.tolist(), "scale": scale},
    )


BUILTINS = {"constant": constant, "sinusoidal": sinusoidal, "kinetic-energy": kinetic_energy}


# ---------------------------------------------------------------------------
# vector fields and flows
# ---------------------------------------------------------------------------


def cone_gradient(model, z, F_r, F_x):
    """Euclidean gradient in canonical coordinates of a function of ``(x, r)``."""
    return F_r[:, None] * model.grad_r(z) + np.einsum("bai,ba->bi", model.dx_dz(z), F_x)


def lifted_field(model, spec, z, t):
    """Hamiltonian vector field of ``H = r h_t(x)`` in canonical coordinates."""
    x, r = model.from_canonical(z)
    g = cone_gradient(model, z, spec.value(x, t), r[:, None] * spec.grad(x, t))
    return g @ model.omega_inv.T


def _sigma_field(model, spec, x, t):
    z = model.to_canonical(x, 1.0)
    X = lifted_field(model, spec, z, t)
    Y = np.einsum("bai,bi->ba", model.dx_dz(z), X)
    rate = -np.einsum("bi,bi->b", model.grad_r(z), X)
    return Y, rate


def contact_vector_field(model, spec, t, x):
    """Contact vector field ``Y_t(x)`` with ``alpha(Y) = h_t`` (ambient coordinates)."""
    _check_spec(model, spec)
    xb = model.check(x)
    Y, _ = _sigma_field(model, spec, xb, t)
    return Y[0] if np.ndim(x) == 1 else Y


def reeb_derivative(model, spec, t, x):
    """``dh_t(R)(x)``: the logarithmic growth rate of the conformal factor."""
    _check_spec(model, spec)
    xb = model.check(x)
    _, rate = _sigma_field(model, spec, xb, t)
    return rate[0] if np.ndim(x) == 1 else rate


def _check_spec(model, spec):
    if spec.model != model:
        raise ValueError(f"spec is defined on {spec.model!r}, not {model!r}")


@dataclass
class FlowResult:
    x_end: np.ndarray
    rho: float
    trajectory: Optional[np.ndarray] = None
    jacobian: Optional[np.ndarray] = None


def flow_batch(model, spec, x, t, *, t0=0.0, tol=1e-11, jacobian=False, s_eval=None):
    """Flow a batch of points for individual durations ``t`` starting at time ``t0``.

    Integrates ``x' = Y_tau(x)`` together with the scalar equation
    ``rho' = dh_tau(R)(x) rho`` in rescaled time ``s in [0, 1]``.

    Returns ``(x_end, rho, traj, jac)`` where ``traj`` has shape
    ``(K, B, ambient + 1)`` (states at ``s_eval``) and ``jac`` is the
    ambient Jacobian of the time-``t`` map.
    """
    x = model.as_batch(x)
    B, n = x.shape
    dur = np.broadcast_to(np.asarray(t, dtype=float), (B,)).copy()
    t0 = np.broadcast_to(np.asarray(t0, dtype=float), (B,)).copy()

    def rhs(s, y):
        xs = model.normalize(y[:, :n])
        tau = t0 + dur * s
        Y, rate = _sigma_field(model, spec, xs, tau)
        out = [dur[:, None] * Y, (dur * rate * y[:, n])[:, None]]
        if jacobian:
            Phi = y[:, n + 1 :].reshape(B, n, n)
            DY = np.empty((B, n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = FD_STEP
                Yp, _ = _sigma_field(model, spec, xs + e, tau)
                Ym, _ = _sigma_field(model, spec, xs - e, tau)
                DY[:, :, j] = (Yp - Ym) / (2 * FD_STEP)
            out.append((dur[:, None, None] * DY @ Phi).reshape(B, n * n))
        return np.hstack(out)

    parts = [x, np.ones((B, 1))]
    if jacobian:
        parts.append(np.broadcast_to(np.eye(n).ravel(), (B, n * n)))
    y0 = np.hstack(parts)
    y1, ys = integrate(rhs, y0, 0.0, 1.0, tol=tol, t_eval=s_eval, error_index=np.arange(n + 1))
    x_end = model.normalize(y1[:, :n])
    rho = y1[:, n]
    jac = y1[:, n + 1 :].reshape(B, n, n) if jacobian else None
    if ys is not None:
        ys = ys[:, :, : n + 1].copy()
        for k in range(len(ys)):
            ys[k, :, :n] = model.normalize(ys[k, :, :n])
    return x_end, rho, ys, jac


def flow(model, spec, x, t, tol=1e-11, trajectory=False, n_samples=65):
    """Time-``t`` map of the contact isotopy and its conformal factor at ``x``."""
    _check_spec(model, spec)
    xb = model.check(x)
    if not np.isfinite(t):
        raise ValueError("flow time must be finite")
    s_eval = np.linspace(0.0, 1.0, n_samples) if trajectory else None
    x_end, rho, ys, _ = flow_batch(model, spec, xb, t, tol=tol, s_eval=s_eval)
    traj = ys[:, 0, :] if ys is not None else None
    return FlowResult(x_end=x_end[0], rho=float(rho[0]), trajectory=traj)


@dataclass
class PathReport:
    positive: bool
    twisted_periodic: bool
    max_violation: float
    min_h: float
    h_periodicity: float


def default_grid(model, n_points=32, n_times=32):
    """Deterministic sample grid ``(points, times)`` for path validation."""
    if isinstance(model, Circle):
        pts = model.seed_points(n_points)
    else:
        pts = model.sample(np.random.default_rng(0), n_points)
    return pts, np.arange(n_times) / n_times


def validate_path(model, spec, sample_grid=None, tol=1e-11, threshold=1e-6):
    """Check positivity and twisted periodicity of the path generated by ``spec``."""
    _check_spec(model, spec)
    pts, times = default_grid(model) if sample_grid is None else sample_grid
    pts = model.check(pts)
    times = np.asarray(times, dtype=float).ravel()
    if len(pts) == 0 or len(times) == 0:
        raise ValueError("sample grid must be nonempty")
    X = np.repeat(pts, len(times), axis=0)
    T = np.tile(times, len(pts))
    hv = spec.value(X, T)
    min_h = float(np.min(hv))
    h_per = float(np.max(np.abs(spec.value(X, T + 1.0) - hv)))
    x_long, _, _, _ = flow_batch(model, spec, X, T + 1.0, tol=tol)
    x_one, _, _, _ = flow_batch(model, spec, pts, 1.0, tol=tol)
    x_comp, _, _, _ = flow_batch(model, spec, np.repeat(x_one, len(times), axis=0), T, tol=tol)
    viol = float(np.max(model.distance(x_long, x_comp)))
    return PathReport(
        positive=bool(min_h > 0),
        twisted_periodic=bool(viol <= threshold and h_per <= threshold),
        max_violation=max(viol, h_per),
        min_h=min_h,
        h_periodicity=h_per,
    )


def contact_condition(model, x):
    """Return ``(volume, reeb_alpha_err, reeb_dalpha_err)`` at the sampled points.

    ``volume`` is ``|alpha|`` times ``|det dalpha|_ker alpha|``, nonzero exactly
    where ``alpha ^ (dalpha)^n`` is nonvanishing.
    """
    x = model.check(x)
    E = model.tangent_basis(x)
    a = np.einsum("ba,bak->bk", model.alpha(x), E)
    D = np.einsum("bak,bac,bcl->bkl", E, model.dalpha(x), E)
    vols = []
    for ak, Dk in zip(a, D):
        norm = np.linalg.norm(ak)
        if model.dim == 1:
            vols.append(norm)
            continue
        _, _, vt = np.linalg.svd(ak[None, :])
        K = vt[1:].T
        vols.append(norm * abs(np.linalg.det(K.T @ Dk @ K)))
    R = model.reeb(x)
    r_alpha = np.abs(np.einsum("ba,ba->b", model.alpha(x), R) - 1.0)
    Rt = np.einsum("bak,ba->bk", E, R)
    r_d = np.linalg.norm(np.einsum("bk,bkl->bl", Rt, D), axis=1)
    return np.array(vols), r_alpha, r_d
