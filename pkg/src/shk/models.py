"""Ready-made coarse-grained models.

Two worked systems: a plasma kicked by random electrostatic pulses
(isotropic impulse directions, three noise modes) and the resonant
wave-particle model in action-angle variables (phase randomized once per
period, two noise modes), plus the shared-noise counterexample that has
the same one-particle statistics as the pulse model but different pair
statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .bessel import bessel_j, bessel_j_prime, bessel_jn_table
from .coarse_grain import (
    CovarianceKernel,
    LangevinModel,
    PerturbationEnsemble,
    TimeDependentField,
    assemble_langevin,
)
from .errors import DomainError
from .phase import ScalarField, as_state, constant_field, kinetic_energy_field, linear_field


def sinc(x):
    """Unnormalized sinc: sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


# ---------------------------------------------------------------------------
# Example: random electrostatic pulses


@dataclass(frozen=True)
class PulseParams:
    """Random-pulse forcing: potential amplitude phi0, charge-to-mass
    ratio qm, pulse interval tau, and a temporal window on [0, tau].

    ``window`` is "impulse" (delta at tau/2), "uniform" (u = 1), or a
    callable u(t).  The first and second window moments
    m0 = qm*phi0*int u, m1 = qm*phi0*int (tau-s) u(s) ds determine the
    model completely.
    """

    phi0: float = 1.0
    qm: float = 1.0
    tau: float = 2.0
    window: object = "impulse"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    def moments(self) -> tuple[float, float]:
        a = self.qm * self.phi0
        if self.window == "impulse":
            return a, a * self.tau / 2.0
        if self.window == "uniform":
            return a * self.tau, a * self.tau ** 2 / 2.0
        from .quadrature import integrate

        m0 = a * integrate(np.vectorize(self.window), 0.0, self.tau, n_panels=8)
        m1 = a * integrate(
            lambda s: (self.tau - s) * np.vectorize(self.window)(s), 0.0, self.tau, n_panels=8
        )
        if not (np.isfinite(m0) and np.isfinite(m1)):
            raise ValueError("window moments must be finite")
        return m0, m1

    def s2_constant(self) -> float:
        """s2 for this forcing; state-independent for every window."""
        if self.window == "impulse":
            return 0.0
        if self.window == "uniform":
            return -((self.qm * self.phi0) ** 2) * self.tau ** 3 / 12.0
        from .quadrature import gauss_legendre_nodes

        u = np.vectorize(self.window)
        a_nodes, a_w = gauss_legendre_nodes(0.0, self.tau, 8, 16)
        total = 0.0
        for a, wa in zip(a_nodes, a_w):
            b_nodes, b_w = gauss_legendre_nodes(0.0, a, 8, 16)
            total += wa * float(
                np.sum(b_w * u(self.tau - b_nodes) * u(self.tau - a) * (b_nodes - a))
            )
        return 0.5 * (self.qm * self.phi0) ** 2 * total


def pulse_noise_hamiltonians(p: PulseParams) -> list[ScalarField]:
    """Orthonormal noise modes H_i = e_i . (m1 v - m0 x) / sqrt(3)."""
    m0, m1 = p.moments()
    fields = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        fields.append(
            linear_field(-m0 / np.sqrt(3.0) * e, m1 / np.sqrt(3.0) * e, name=f"pulse_mode_{i}")
        )
    return fields


def pulse_model(p: PulseParams) -> LangevinModel:
    """Coarse-grained model of the pulse-kicked plasma.

    Noise coefficients: dx gets m1/sqrt(3 tau), dv gets m0/sqrt(3 tau) on
    each component; the drift correction is constant and drops out of the
    dynamics.
    """
    m0, m1 = p.moments()
    model = assemble_langevin(
        kinetic_energy_field(3),
        constant_field(p.s2_constant(), dim=3),
        pulse_noise_hamiltonians(p),
        eps=1.0,
        tau=p.tau,
    )
    # coefficients are affine in z: X_0 = (v, 0), constant noise fields
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    cs = []
    for i in range(3):
        c = np.zeros(6)
        c[i] = m1 / np.sqrt(3.0 * p.tau)
        c[3 + i] = m0 / np.sqrt(3.0 * p.tau)
        cs.append(c)
    model.metadata["affine"] = (A, np.zeros(6), [np.zeros((6, 6))] * 3, cs)
    return model


def pulse_ensemble(p: PulseParams) -> PerturbationEnsemble:
    """The microscopic forcing as a perturbation ensemble: one pulse per
    interval with a uniformly random direction."""
    a = p.qm * p.phi0

    def sampler(seed):
        rng = np.random.default_rng(seed)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        spatial = linear_field(a * d, np.zeros(3), name="pulse_potential")
        if p.window == "impulse":
            return TimeDependentField(impulses=[(p.tau / 2.0, spatial)], dim=3)
        if p.window == "uniform":
            return TimeDependentField(smooth=lambda t: spatial, dim=3)
        u = p.window
        return TimeDependentField(smooth=lambda t: float(u(t)) * spatial, dim=3)

    return PerturbationEnsemble(sampler, tau=p.tau, eps=1.0, tau_ac=0.0, dim=3)


def pulse_kernel(p: PulseParams) -> CovarianceKernel:
    """Closed-form two-point covariance of the pulse forcing.

    The kick field is state-independent, so the kernel is a constant
    block matrix built from the sphere average E[d d^T] = I/3.
    """
    m0, m1 = p.moments()
    C = np.zeros((6, 6))
    C[:3, :3] = m1 ** 2 / 3.0 * np.eye(3)
    C[:3, 3:] = m0 * m1 / 3.0 * np.eye(3)
    C[3:, :3] = m0 * m1 / 3.0 * np.eye(3)
    C[3:, 3:] = m0 ** 2 / 3.0 * np.eye(3)

    def pair_eval(Za, Zb):
        M, N = Za.shape[0], Zb.shape[0]
        return np.broadcast_to(C, (M, N, 6, 6)).copy()

    return CovarianceKernel(pair_eval=pair_eval, dim=3)


def pulse_micro_simulate(p: PulseParams, z0, n_steps: int, seed) -> np.ndarray:
    """Exact microscopic trajectory sampled at the pulse interval.

    The pulse potential is linear in x, so each interval has the closed
    form x -> x + v tau - m1 d, v -> v - m0 d with d the pulse direction.
    Returns states of shape (n_steps + 1, 6).
    """
    m0, m1 = p.moments()
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_steps, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    Z = np.empty((n_steps + 1, 6))
    Z[0] = as_state(z0)
    for k in range(n_steps):
        x, v = Z[k, :3], Z[k, 3:]
        Z[k + 1, :3] = x + v * p.tau - m1 * d[k]
        Z[k + 1, 3:] = v - m0 * d[k]
    return Z


def pulse_micro_jump_moments(p: PulseParams, n_intervals: int, seed):
    """Empirical drift and diffusion of the exact micro map, relative to
    free streaming, with standard errors.  The kick statistics are
    state-independent, so no initial condition is needed."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_intervals, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    m0, m1 = p.moments()
    dz = np.concatenate([-m1 * d, -m0 * d], axis=1)  # (N, 6)
    drift = dz.mean(axis=0) / p.tau
    drift_se = dz.std(axis=0, ddof=1) / np.sqrt(n_intervals) / p.tau
    outer = np.einsum("ni,nj->nij", dz, dz) / (2.0 * p.tau)
    diff = outer.mean(axis=0)
    diff_se = outer.std(axis=0, ddof=1) / np.sqrt(n_intervals)
    return drift, drift_se, diff, diff_se


class VectorFieldModel:
    """A Stratonovich model given by explicit drift/noise vector fields.

    Covers models that are not of Hamiltonian form; the integrator only
    needs ``drift``, ``noise``, ``n_modes`` and ``dim``.
    """

    def __init__(self, drift_fn, noise_fns, *, dim=3, metadata=None):
        self._drift = drift_fn
        self._noise = list(noise_fns)
        self.dim = dim
        self.metadata = dict(metadata or {})

    @property
    def n_modes(self) -> int:
        return len(self._noise)

    def drift(self, Z):
        return self._drift(as_state(Z))

    def noise(self, Z):
        Z = as_state(Z)
        return np.stack([f(Z) for f in self._noise])

    def affine_coefficients(self):
        return self.metadata.get("affine")


def counterexample_model(p: PulseParams, phi: ScalarField) -> VectorFieldModel:
    """Six-mode model with cos/sin(phi) mixing of the pulse noise.

    Generates the same one-particle forward equation as ``pulse_model``
    for any phi, but different two-particle statistics when phi is not
    constant.  Not of Hamiltonian form for generic phi.
    """
    m0, m1 = p.moments()
    s = 1.0 / np.sqrt(3.0 * p.tau)

    def drift(Z):
        out = np.zeros_like(Z)
        out[..., :3] = Z[..., 3:]
        return out

    noise_fns = []
    for trig, sign in ((np.cos, 1.0), (np.sin, -1.0)):
        for i in range(3):
            def fn(Z, trig=trig, sign=sign, i=i):
                w = sign * trig(phi.value(Z))
                out = np.zeros_like(Z)
                out[..., i] = s * m1 * w
                out[..., 3 + i] = s * m0 * w
                return out

            noise_fns.append(fn)
    return VectorFieldModel(drift, noise_fns, dim=3, metadata={"hamiltonian": False})


# ---------------------------------------------------------------------------
# Example: resonant wave-particle interaction in action-angle variables


@dataclass(frozen=True)
class KarneyParams:
    """Phase-randomized resonant wave model on (angle, action).

    eps is the normalized wave amplitude, nu the (real) harmonic number;
    n0 is the nearest integer and delta = nu - n0 with |delta| < 1/2.
    The action domain excludes 0 to avoid the sqrt(2I) coordinate
    degeneracy; series_cutoff truncates the drift-correction sum.
    """

    eps: float = 0.01
    nu: float = 3.2
    I_min: float = 0.1
    I_max: float = 40.0
    series_cutoff: int = 60
    _spline_points: int = 512

    def __post_init__(self):
        n0 = int(np.rint(self.nu))
        delta = self.nu - n0
        if abs(delta) >= 0.5:
            raise ValueError("nu must be within 1/2 of an integer")
        if self.I_min <= 0 or self.I_max <= self.I_min:
            raise ValueError("need 0 < I_min < I_max")

    @property
    def n0(self) -> int:
        return int(np.rint(self.nu))

    @property
    def delta(self) -> float:
        return float(self.nu - self.n0)

    @property
    def tau(self) -> float:
        return 2.0 * np.pi


def _sinc2pi_minus_one_over(delta: float) -> float:
    """(sinc(2 pi delta) - 1) / delta, with the even limit 0 at delta=0."""
    if abs(delta) < 1e-3:
        y = 2.0 * np.pi * delta
        return delta * (2.0 * np.pi) ** 2 * (-1.0 / 6.0 + y * y / 120.0 - y ** 4 / 5040.0)
    return float((sinc(2.0 * np.pi * delta) - 1.0) / delta)


def karney_mean_s2(I, p: KarneyParams) -> float | np.ndarray:
    """Second-order drift correction E[s2](I): the principal-value-like
    harmonic sum plus the resonant term, which together stay finite as
    delta -> 0 (the symmetric limit)."""
    Is = np.atleast_1d(np.asarray(I, dtype=float))
    out = np.empty(Is.shape)
    M, n0, nu, delta = p.series_cutoff, p.n0, p.nu, p.delta
    for idx, Ival in enumerate(Is):
        x = np.sqrt(2.0 * Ival)
        J = bessel_jn_table(M + 2, x)

        def j2(k):
            return J[abs(k)] ** 2

        total = 0.0
        for m in range(-M, M + 1):
            if m == n0:
                continue
            total += (j2(m + 1) - j2(m - 1)) / (m - nu)
        total += (j2(n0 + 1) - j2(n0 - 1)) * _sinc2pi_minus_one_over(delta)
        out[idx] = 0.5 * np.pi * total
    return out if np.asarray(I).ndim else float(out[0])


def karney_flow(Z, t: float) -> np.ndarray:
    """Unperturbed flow of H0 = I on (theta, I): theta advances at unit
    rate, the action is constant."""
    Z = np.asarray(Z, dtype=float)
    out = Z.copy()
    out[..., 0] += t
    return out


def _karney_amplitude(p: KarneyParams):
    """A(I) = 2 pi sinc(pi delta) J_{n0}(sqrt(2I)) and dA/dI."""
    pref = 2.0 * np.pi * float(sinc(np.pi * p.delta))

    def A(I):
        return pref * bessel_j(p.n0, np.sqrt(2.0 * I))

    def dA(I):
        x = np.sqrt(2.0 * I)
        return pref * bessel_j_prime(p.n0, x) / x

    return A, dA


def karney_model(p: KarneyParams) -> LangevinModel:
    """Coarse-grained model: two noise modes proportional to
    J_{n0}(sqrt(2I)) cos/sin(n0 theta), and a slow action-dependent
    rotation correction.

    States are (theta, I) with theta in the position slot.  Evaluations
    outside [I_min, I_max] raise DomainError.
    """
    n0 = p.n0
    tau = p.tau
    # Drift correction tabulated once; a clamped cubic spline keeps the
    # per-step field evaluations cheap and consistent with its derivative.
    Igrid = np.linspace(p.I_min, p.I_max, p._spline_points)
    s2_spline = CubicSpline(Igrid, karney_mean_s2(Igrid, p))
    ds2_spline = s2_spline.derivative()

    def check_domain(I):
        if np.any(I < p.I_min - 1e-12) or np.any(I > p.I_max + 1e-12):
            raise DomainError(
                f"action left the model domain [{p.I_min}, {p.I_max}]"
            )

    c = p.eps ** 2 / tau

    def drift_val(Z):
        I = Z[..., 1]
        check_domain(I)
        return I + c * s2_spline(I)

    def drift_grad(Z):
        I = Z[..., 1]
        check_domain(I)
        g = np.zeros(Z.shape)
        g[..., 1] = 1.0 + c * ds2_spline(I)
        return g

    H0eff = ScalarField(drift_val, drift_grad, dim=1, name="action+drift_correction")

    A, dA = _karney_amplitude(p)
    scale = p.eps / np.sqrt(tau)

    def make_mode(trig, dtrig, tag):
        def val(Z):
            th, I = Z[..., 0], Z[..., 1]
            check_domain(I)
            return scale * A(I) * trig(n0 * th)

        def grad(Z):
            th, I = Z[..., 0], Z[..., 1]
            check_domain(I)
            g = np.empty(Z.shape)
            g[..., 0] = scale * A(I) * n0 * dtrig(n0 * th)
            g[..., 1] = scale * dA(I) * trig(n0 * th)
            return g

        return ScalarField(val, grad, dim=1, name=tag)

    modes = [
        make_mode(np.cos, lambda y: -np.sin(y), "wave_mode_cos"),
        make_mode(np.sin, np.cos, "wave_mode_sin"),
    ]
    return LangevinModel(H0eff, modes, dim=1, metadata={"hamiltonian": True})


def karney_kernel(p: KarneyParams) -> CovarianceKernel:
    """Analytic two-point covariance of the phase-randomized wave kicks.

    Built directly from the uniform-phase average of the first-order kick
    (cos/sin difference kernels), not from the mode basis, so the
    decomposition genuinely has to recover the two modes.
    """
    A, dA = _karney_amplitude(p)
    n0 = p.n0

    def pair_eval(Za, Zb):
        tha, Ia = Za[:, 0], Za[:, 1]
        thb, Ib = Zb[:, 0], Zb[:, 1]
        Aa, dAa = A(Ia), dA(Ia)
        Ab, dAb = A(Ib), dA(Ib)
        ca = np.cos(n0 * (tha[:, None] - thb[None, :]))
        sa = np.sin(n0 * (tha[:, None] - thb[None, :]))
        out = np.empty((Za.shape[0], Zb.shape[0], 2, 2))
        out[..., 0, 0] = 0.5 * dAa[:, None] * dAb[None, :] * ca
        out[..., 0, 1] = -0.5 * n0 * dAa[:, None] * Ab[None, :] * sa
        out[..., 1, 0] = 0.5 * n0 * Aa[:, None] * dAb[None, :] * sa
        out[..., 1, 1] = 0.5 * n0 ** 2 * Aa[:, None] * Ab[None, :] * ca
        return out

    return CovarianceKernel(pair_eval=pair_eval, dim=1)


def karney_action_diffusion(I, p: KarneyParams) -> float | np.ndarray:
    """Predicted <dI^2>/(2 dt) at fixed action:
    (eps^2 pi / 2) sinc^2(pi delta) n0^2 J_{n0}(sqrt(2I))^2."""
    J = bessel_j(p.n0, np.sqrt(2.0 * np.asarray(I, dtype=float)))
    return 0.5 * p.eps ** 2 * np.pi * float(sinc(np.pi * p.delta)) ** 2 * p.n0 ** 2 * J ** 2
