"""Canonical phase-space calculus.

Phase points live in R^{2n}, split as (x, v) with the canonical two-form
``dx^i ^ dv_i``.  Everything here is a pure function of immutable inputs,
so any of it may be called concurrently.

Array convention: a "state array" has shape ``(..., 2n)`` with the first n
slots holding x and the last n holding v.  All fields are expected to
evaluate vectorized over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, NonFiniteError

# optimal central-difference step scale for first derivatives
FD_STEP = float(np.cbrt(np.finfo(float).eps))


@dataclass(frozen=True)
class PhasePoint:
    """A point z = (x, v) in 2n-dimensional canonical phase space."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        if x.shape != v.shape or x.ndim != 1:
            raise DimensionMismatchError(
                f"x and v must be 1-d arrays of equal length, got {x.shape} and {v.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise NonFiniteError("phase point has non-finite components")

    @property
    def dim(self) -> int:
        """Number of spatial degrees of freedom n."""
        return self.x.shape[0]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.v])

    @classmethod
    def from_array(cls, z: np.ndarray) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        n = z.shape[-1] // 2
        return cls(z[..., :n], z[..., n:])


def as_state(z) -> np.ndarray:
    """Coerce a PhasePoint or array-like to a state array of shape (..., 2n)."""
    if isinstance(z, PhasePoint):
        return z.as_array()
    z = np.asarray(z, dtype=float)
    if z.shape[-1] % 2 != 0:
        raise DimensionMismatchError(f"state array must have even last axis, got {z.shape}")
    return z


def symplectic_matrix(n: int) -> np.ndarray:
    """The canonical matrix O with omega(Y, Z) = Y^T O Z, O = [[0, I], [-I, 0]]."""
    eye = np.eye(n)
    return np.block([[np.zeros((n, n)), eye], [-eye, np.zeros((n, n))]])


def _fd_gradient(value, Z: np.ndarray) -> np.ndarray:
    """Central finite-difference gradient of ``value`` at states Z (..., 2n)."""
    Z = np.asarray(Z, dtype=float)
    h = FD_STEP * np.maximum(1.0, np.abs(Z))
    grad = np.empty(Z.shape)
    for i in range(Z.shape[-1]):
        zp = Z.copy()
        zm = Z.copy()
        zp[..., i] += h[..., i]
        zm[..., i] -= h[..., i]
        grad[..., i] = (value(zp) - value(zm)) / (zp[..., i] - zm[..., i])
    return grad


class ScalarField:
    """A smooth scalar function on phase space.

    Parameters
    ----------
    value : callable
        Maps a state array (..., 2n) to values (...).
    gradient : callable, optional
        Maps states to gradients (..., 2n).  When omitted, central finite
        differences with step ``cbrt(eps) * max(1, |coord|)`` are used.
    dim : int
        Spatial dimension n.
    name : str
        Human-readable label.
    """

    def __init__(self, value, gradient=None, *, dim=3, name="field"):
        self._value = value
        self._gradient = gradient
        self.dim = int(dim)
        self.name = name

    def value(self, z) -> np.ndarray:
        return np.asarray(self._value(as_state(z)), dtype=float)

    def gradient(self, z) -> np.ndarray:
        Z = as_state(z)
        if self._gradient is not None:
            return np.asarray(self._gradient(Z), dtype=float)
        return _fd_gradient(self._value, Z)

    def __call__(self, z):
        return self.value(z)

    # fields form a vector space; keep analytic gradients through the algebra
    def __add__(self, other):
        if isinstance(other, ScalarField):
            if other.dim != self.dim:
                raise DimensionMismatchError("cannot add fields of different dimension")
            g = None
            if self._gradient is not None and other._gradient is not None:
                g = lambda Z: self.gradient(Z) + other.gradient(Z)
            return ScalarField(
                lambda Z: self.value(Z) + other.value(Z),
                g,
                dim=self.dim,
                name=f"({self.name}+{other.name})",
            )
        c = float(other)
        g = self._gradient
        return ScalarField(lambda Z: self.value(Z) + c, g, dim=self.dim, name=self.name)

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        g = None
        if self._gradient is not None:
            g = lambda Z: c * self.gradient(Z)
        return ScalarField(
            lambda Z: c * self.value(Z), g, dim=self.dim, name=f"{c}*{self.name}"
        )

    __rmul__ = __mul__


def constant_field(c: float, dim=3, name="const") -> ScalarField:
    c = float(c)
    return ScalarField(
        lambda Z: np.full(Z.shape[:-1], c),
        lambda Z: np.zeros(Z.shape),
        dim=dim,
        name=name,
    )


def kinetic_energy_field(dim=3) -> ScalarField:
    """H0 = |v|^2 / 2, the free-streaming Hamiltonian."""
    n = dim

    def val(Z):
        return 0.5 * np.sum(Z[..., n:] ** 2, axis=-1)

    def grad(Z):
        g = np.zeros(Z.shape)
        g[..., n:] = Z[..., n:]
        return g

    return ScalarField(val, grad, dim=dim, name="|v|^2/2")


def linear_field(a: np.ndarray, b: np.ndarray, const=0.0, name="linear") -> ScalarField:
    """The affine field a.x + b.v + const with exact gradient."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    coeff = np.concatenate([a, b])

    def val(Z):
        return Z @ coeff + const

    def grad(Z):
        return np.broadcast_to(coeff, Z.shape).copy()

    return ScalarField(val, grad, dim=n, name=name)


@dataclass
class SymmetricTensorField:
    """Maps a phase point to a symmetric (2n x 2n) matrix (a bilinear form
    on phase-space vectors)."""

    eval_fn: "callable" = field(repr=False)
    dim: int = 3
    name: str = "tensor"

    def eval(self, z) -> np.ndarray:
        A = np.asarray(self.eval_fn(as_state(z)), dtype=float)
        return A

    def __call__(self, z):
        return self.eval(z)


def _check_dims(*objs):
    dims = {o.dim for o in objs}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mixed phase-space dimensions: {sorted(dims)}")


def poisson_bracket(f: ScalarField, g: ScalarField, z) -> float:
    """Canonical bracket {f, g} = sum_i df/dx^i dg/dv_i - df/dv_i dg/dx^i."""
    Z = as_state(z)
    n = Z.shape[-1] // 2
    _check_dims(f, g)
    if f.dim != n:
        raise DimensionMismatchError(f"field dim {f.dim} does not match state dim {n}")
    gf = f.gradient(Z)
    gg = g.gradient(Z)
    out = np.sum(gf[..., :n] * gg[..., n:] - gf[..., n:] * gg[..., :n], axis=-1)
    return out if out.ndim else float(out)


def hamiltonian_vector_field(h: ScalarField, z) -> np.ndarray:
    """X_h = (dh/dv, -dh/dx); satisfies {f, h} = df . X_h for every f."""
    Z = as_state(z)
    n = Z.shape[-1] // 2
    if h.dim != n:
        raise DimensionMismatchError(f"field dim {h.dim} does not match state dim {n}")
    g = h.gradient(Z)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"gradient of {h.name} is not finite")
    return np.concatenate([g[..., n:], -g[..., :n]], axis=-1)


def free_streaming_flow(z, t: float):
    """Exact flow of H0 = |v|^2/2: (x, v) -> (x + v t, v)."""
    if isinstance(z, PhasePoint):
        return PhasePoint(z.x + z.v * t, z.v)
    Z = as_state(z)
    n = Z.shape[-1] // 2
    out = Z.copy()
    out[..., :n] += t * Z[..., n:]
    return out


def free_streaming_jacobian(n: int, t: float) -> np.ndarray:
    """d F_t / dz for the free-streaming flow: [[I, tI], [0, I]]."""
    J = np.eye(2 * n)
    J[:n, n:] = t * np.eye(n)
    return J


def flow_rk4(h: ScalarField, z, t: float) -> np.ndarray:
    """One classical 4th-order step of size t along X_h."""
    Z = as_state(z)
    k1 = hamiltonian_vector_field(h, Z)
    k2 = hamiltonian_vector_field(h, Z + 0.5 * t * k1)
    k3 = hamiltonian_vector_field(h, Z + 0.5 * t * k2)
    k4 = hamiltonian_vector_field(h, Z + t * k3)
    return Z + (t / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _flow_jacobian_fd(h: ScalarField, Z: np.ndarray, t: float) -> np.ndarray:
    """Jacobian of the one-step RK4 flow, by central differences."""
    d = Z.shape[-1]
    J = np.empty((d, d))
    eps = np.sqrt(np.finfo(float).eps)
    for i in range(d):
        hstep = eps * max(1.0, abs(Z[i]))
        zp = Z.copy()
        zm = Z.copy()
        zp[i] += hstep
        zm[i] -= hstep
        J[:, i] = (flow_rk4(h, zp, t) - flow_rk4(h, zm, t)) / (zp[i] - zm[i])
    return J


def lie_derivative_tensor(
    h: ScalarField, alpha: SymmetricTensorField, z, step: float
) -> np.ndarray:
    """(L_{X_h} alpha)(z) by flow-transport differencing.

    Pulls alpha back along the time +/- step flow of X_h (one RK4 step,
    Jacobians by finite differences) and central-differences the two
    transports.  Works for tensors that are only defined numerically.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    Z = as_state(z)
    zp = flow_rk4(h, Z, step)
    zm = flow_rk4(h, Z, -step)
    if not (np.all(np.isfinite(zp)) and np.all(np.isfinite(zm))):
        raise NonFiniteError("flow escaped the domain during transport")
    Jp = _flow_jacobian_fd(h, Z, step)
    Jm = _flow_jacobian_fd(h, Z, -step)
    Ap = Jp.T @ alpha.eval(zp) @ Jp
    Am = Jm.T @ alpha.eval(zm) @ Jm
    L = (Ap - Am) / (2.0 * step)
    return 0.5 * (L + L.T)


def check_gradient(field_: ScalarField, pts: np.ndarray) -> float:
    """Largest relative deviation between the field's gradient and central
    finite differences over the given states.  Used to validate analytic
    gradients (the contract is agreement to 1e-5)."""
    worst = 0.0
    for Z in np.atleast_2d(pts):
        ga = field_.gradient(Z)
        gf = _fd_gradient(field_._value, Z)
        scale = np.maximum(1.0, np.abs(gf))
        worst = max(worst, float(np.max(np.abs(ga - gf) / scale)))
    return worst
