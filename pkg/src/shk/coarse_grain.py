"""Coarse-graining of a random Hamiltonian perturbation into a Langevin model.

The pipeline: per-interval kick generators s1, s2 obtained by integrating
the perturbation along the unperturbed flow; the two-point covariance of
X_{s1}; its decomposition into Hamiltonian modes (a Karhunen-Loeve /
Mercer eigenproblem on a grid); and the assembly of the effective model
with drift Hamiltonian H0 + (eps^2/tau) E[s2] and noise Hamiltonians
(eps/sqrt(tau)) H_k.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    KernelNotPSDError,
    NonFiniteError,
    ReconstructionError,
)
from .phase import (
    ScalarField,
    as_state,
    free_streaming_flow,
    hamiltonian_vector_field,
    poisson_bracket,
    symplectic_matrix,
    _fd_gradient,
)
from .quadrature import QuadratureSpec, gauss_legendre_nodes


# ---------------------------------------------------------------------------
# time-dependent perturbations


class TimeDependentField:
    """A time-dependent Hamiltonian perturbation h_t on [0, tau].

    ``smooth(t) -> ScalarField`` gives the regular part; ``impulses`` is a
    list of (t0, ScalarField) pairs representing delta-in-time pulses
    g(z) * delta(t - t0), which are handled exactly rather than by
    quadrature.
    """

    def __init__(self, smooth=None, impulses=(), *, dim=3, name="h_t"):
        self.smooth = smooth
        self.impulses = list(impulses)
        self.dim = dim
        self.name = name

    def at(self, t: float) -> ScalarField | None:
        return self.smooth(t) if self.smooth is not None else None


@dataclass
class PerturbationEnsemble:
    """A distribution over time-dependent perturbations.

    ``sampler(seed) -> TimeDependentField`` must be deterministic per seed.
    ``tau`` is the coarse-graining step, ``eps`` the amplitude, ``tau_ac``
    the declared autocorrelation time (the regime requires tau_ac < tau).
    ``flow`` is the unperturbed flow map (z, t) -> z'; free streaming by
    default.
    """

    sampler: "callable"
    tau: float
    eps: float = 1.0
    tau_ac: float = 0.0
    dim: int = 3
    flow: "callable" = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.tau_ac >= self.tau:
            raise ValueError("regime requires tau_ac < tau")
        if self.flow is None:
            self.flow = free_streaming_flow

    def sample(self, seed) -> TimeDependentField:
        return self.sampler(seed)

    def default_quadrature(self) -> QuadratureSpec:
        # panel width below tau_ac / 4 resolves the correlation structure
        width = self.tau_ac / 4.0 if self.tau_ac > 0 else None
        return QuadratureSpec(n_panels=4, nodes_per_panel=16, panel_width=width)


# ---------------------------------------------------------------------------
# kick functionals


def _pullback_field(h: TimeDependentField, lam: float, tau: float, flow) -> ScalarField | None:
    """The field z -> h_{tau - lam}(flow(z, -lam)) with FD gradients."""
    base = h.at(tau - lam)
    if base is None:
        return None
    return ScalarField(
        lambda Z: base.value(flow(Z, -lam)), dim=h.dim, name=f"pullback({base.name})"
    )


def _impulse_pullbacks(h: TimeDependentField, tau: float, flow):
    """Impulses of h expressed at integration time lam = tau - t0."""
    out = []
    for t0, g in h.impulses:
        if 0.0 <= t0 <= tau:
            lam = tau - t0
            out.append(
                (
                    lam,
                    ScalarField(
                        lambda Z, g=g, lam=lam: g.value(flow(Z, -lam)),
                        dim=h.dim,
                        name=f"impulse@{t0}",
                    ),
                )
            )
    return out


def compute_s1(h: TimeDependentField, tau: float, z, quad: QuadratureSpec | None = None, flow=None):
    """First-order kick generator.

    s1(z) = integral over lam in [0, tau] of h_{tau-lam}(flow(z, -lam)),
    by composite Gauss-Legendre; impulse parts are inserted exactly.
    Vectorized over a batch of states.
    """
    quad = quad or QuadratureSpec()
    flow = flow or free_streaming_flow
    Z = as_state(z)
    total = np.zeros(Z.shape[:-1])
    if h.smooth is not None:
        nodes, weights = gauss_legendre_nodes(
            0.0, tau, quad.panels(0.0, tau), quad.nodes_per_panel
        )
        for lam, w in zip(nodes, weights):
            f = h.at(tau - lam)
            vals = f.value(flow(Z, -lam))
            if not np.all(np.isfinite(vals)):
                raise NonFiniteError(f"non-finite integrand sample at lam={lam}")
            total = total + w * vals
    for lam, g in _impulse_pullbacks(h, tau, flow):
        total = total + g.value(Z)
    return total if total.ndim else float(total)


def compute_s2(h: TimeDependentField, tau: float, z, quad: QuadratureSpec | None = None, flow=None):
    """Second-order kick generator.

    s2(z) = 1/2 * double integral over 0 <= b <= a <= tau of the Poisson
    bracket of the two pulled-back perturbations.  Brackets use
    finite-difference gradients of the pulled-back fields.
    """
    quad = quad or QuadratureSpec()
    flow = flow or free_streaming_flow
    Z = as_state(z)
    total = np.zeros(Z.shape[:-1])
    imps = _impulse_pullbacks(h, tau, flow)

    if h.smooth is not None:
        a_nodes, a_weights = gauss_legendre_nodes(
            0.0, tau, quad.panels(0.0, tau), quad.nodes_per_panel
        )
        for a, wa in zip(a_nodes, a_weights):
            Pa = _pullback_field(h, a, tau, flow)
            inner = np.zeros(Z.shape[:-1])
            b_nodes, b_weights = gauss_legendre_nodes(
                0.0, a, quad.panels(0.0, a), quad.nodes_per_panel
            )
            for b, wb in zip(b_nodes, b_weights):
                Pb = _pullback_field(h, b, tau, flow)
                inner = inner + wb * poisson_bracket(Pb, Pa, Z)
            total = total + wa * inner
        # impulse at the inner time against the smooth part at the outer
        # time, and vice versa; each gets its own rule on its own range
        for lam_j, Gj in imps:
            if lam_j < tau:
                nodes, weights = gauss_legendre_nodes(
                    lam_j, tau, quad.panels(lam_j, tau), quad.nodes_per_panel
                )
                for a, wa in zip(nodes, weights):
                    Pa = _pullback_field(h, a, tau, flow)
                    total = total + wa * poisson_bracket(Gj, Pa, Z)
            if lam_j > 0:
                nodes, weights = gauss_legendre_nodes(
                    0.0, lam_j, quad.panels(0.0, lam_j), quad.nodes_per_panel
                )
                for b, wb in zip(nodes, weights):
                    Pb = _pullback_field(h, b, tau, flow)
                    total = total + wb * poisson_bracket(Pb, Gj, Z)

    # impulse x impulse, ordered by integration time; the self term is
    # {G, G} = 0 and is skipped
    for i, (lam_i, Gi) in enumerate(imps):
        for lam_j, Gj in imps[i + 1 :]:
            lo, hi = (Gi, Gj) if lam_i < lam_j else (Gj, Gi)
            total = total + poisson_bracket(lo, hi, Z)

    total = 0.5 * total
    return total if total.ndim else float(total)


def s1_vector_field(h: TimeDependentField, tau: float, z, quad=None, flow=None) -> np.ndarray:
    """X_{s1}(z): the Hamiltonian vector field of the first-order kick."""
    Z = as_state(z)
    n = Z.shape[-1] // 2
    grad = _fd_gradient(lambda W: np.asarray(compute_s1(h, tau, W, quad, flow)), Z)
    return np.concatenate([grad[..., n:], -grad[..., :n]], axis=-1)


def mean_s2_field(ens: PerturbationEnsemble, samples: int, seed, quad=None) -> ScalarField:
    """E[s2] as a scalar field, estimated by a fixed Monte-Carlo sample."""
    seeds = np.random.SeedSequence(seed).spawn(samples)
    fields = [ens.sample(s) for s in seeds]
    quad = quad or ens.default_quadrature()

    def val(Z):
        acc = np.zeros(np.asarray(Z).shape[:-1])
        for hf in fields:
            acc = acc + np.asarray(compute_s2(hf, ens.tau, Z, quad, ens.flow))
        return acc / samples

    return ScalarField(val, dim=ens.dim, name="E[s2]")


# ---------------------------------------------------------------------------
# two-point covariance kernel


class CovarianceKernel:
    """Two-point covariance alpha(z1, z2) = E[X_{s1}(z1) (x) X_{s1}(z2)].

    Either analytic (``pair_eval(Za, Zb) -> (M, N, 2n, 2n)``) or
    Monte-Carlo (``sample_fields(Z) -> (S, ..., 2n)`` returning X_{s1}
    samples, averaged on evaluation).
    """

    def __init__(self, *, pair_eval=None, sample_fields=None, dim=3, mode="analytic"):
        if (pair_eval is None) == (sample_fields is None):
            raise ValueError("provide exactly one of pair_eval / sample_fields")
        self._pair_eval = pair_eval
        self._sample_fields = sample_fields
        self.dim = dim
        self.mode = mode if pair_eval is not None else "monte-carlo"

    def pairwise(self, Za, Zb) -> np.ndarray:
        Za = np.atleast_2d(as_state(Za))
        Zb = np.atleast_2d(as_state(Zb))
        if self._pair_eval is not None:
            return np.asarray(self._pair_eval(Za, Zb), dtype=float)
        Xa = self._sample_fields(Za)  # (S, M, 2n)
        Xb = self._sample_fields(Zb)
        return np.einsum("smi,snj->mnij", Xa, Xb) / Xa.shape[0]

    def eval(self, z1, z2) -> np.ndarray:
        return self.pairwise(z1, z2)[0, 0]

    def gram(self, grid) -> np.ndarray:
        """Block Gram matrix over a finite point set, shape (N*2n, N*2n)."""
        G = np.atleast_2d(as_state(grid))
        N, d = G.shape
        blocks = self.pairwise(G, G)
        A = blocks.transpose(0, 2, 1, 3).reshape(N * d, N * d)
        return 0.5 * (A + A.T)

    def entry_stderr(self, grid) -> np.ndarray | None:
        """Per-entry standard errors of the Gram blocks (Monte-Carlo mode)."""
        if self._sample_fields is None:
            return None
        G = np.atleast_2d(as_state(grid))
        X = self._sample_fields(G)  # (S, N, 2n)
        S = X.shape[0]
        outer = np.einsum("smi,snj->smnij", X, X)
        return outer.std(axis=0, ddof=1) / np.sqrt(S)


def kernel_from_fields(fields, dim) -> CovarianceKernel:
    """alpha(z1,z2) = sum_f X_f(z1) (x) X_f(z2) for a finite list of
    Hamiltonian generators (an exact finite-rank kernel)."""

    def pair_eval(Za, Zb):
        Xa = np.stack([hamiltonian_vector_field(f, Za) for f in fields])  # (F, M, 2n)
        Xb = np.stack([hamiltonian_vector_field(f, Zb) for f in fields])
        return np.einsum("fmi,fnj->mnij", Xa, Xb)

    return CovarianceKernel(pair_eval=pair_eval, dim=dim)


def estimate_covariance_kernel(
    ens: PerturbationEnsemble, pts, samples: int, seed, quad=None
) -> CovarianceKernel:
    """Monte-Carlo kernel over independent draws of the perturbation.

    Returns a kernel whose evaluations average X_{s1} over the fixed set
    of sampled perturbations; per-entry standard errors are available via
    ``entry_stderr``.  ``pts`` declares the intended estimation grid and is
    used only for the degenerate-ensemble diagnostic.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    quad = quad or ens.default_quadrature()
    seeds = np.random.SeedSequence(seed).spawn(samples)
    fields = [ens.sample(s) for s in seeds]

    def sample_fields(Z):
        Z = np.atleast_2d(as_state(Z))
        return np.stack([s1_vector_field(hf, ens.tau, Z, quad, ens.flow) for hf in fields])

    probe = np.atleast_2d(as_state(pts))[:1]
    X0 = sample_fields(probe)
    if np.allclose(X0, X0[0], atol=1e-14):
        warnings.warn("degenerate ensemble: all perturbation draws are identical")
    return CovarianceKernel(sample_fields=sample_fields, dim=ens.dim)


# ---------------------------------------------------------------------------
# Karhunen-Loeve decomposition into Hamiltonian noise modes


@dataclass
class NoiseBasis:
    """Ordered Hamiltonian noise modes H_k recovered from a kernel.

    The modes reproduce the kernel on its construction grid:
    sum_k X_{H_k}(z1) (x) X_{H_k}(z2) ~= alpha(z1, z2).
    """

    fields: list
    eigenvalues: np.ndarray
    captured_fraction: float
    coefficients: np.ndarray = field(repr=False)  # (K, N*2n)
    grid: np.ndarray = field(repr=False)
    gram_matrix: np.ndarray = field(repr=False)
    dim: int = 3

    @property
    def rank(self) -> int:
        return len(self.fields)

    def vector_fields(self, Z) -> np.ndarray:
        """Sampled mode fields X_{H_k}(Z), shape (K, ..., 2n)."""
        return np.stack([hamiltonian_vector_field(f, Z) for f in self.fields])

    def mode_gram(self) -> np.ndarray:
        """Gram matrix of the modes in the kernel inner product (grid
        estimate); the identity up to eigensolver roundoff."""
        return self.coefficients @ self.gram_matrix @ self.coefficients.T

    def reconstruction(self, Z) -> np.ndarray:
        """sum_k X_{H_k}(z) (x) X_{H_k}(z), shape (..., 2n, 2n)."""
        X = self.vector_fields(Z)
        return np.einsum("k...i,k...j->...ij", X, X)


def _line_integral_value(grad_fn, anchor, order=32):
    """Scalar potential from its gradient by straight-line integration."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights

    def val(Z):
        Z = np.asarray(Z, dtype=float)
        d = Z - anchor
        acc = np.zeros(Z.shape[:-1])
        for si, wi in zip(s, w):
            g = grad_fn(anchor + si * d)
            acc = acc + wi * np.sum(g * d, axis=-1)
        return acc

    return val


def _loop_residue(grad_fn, a, b, c, order=16):
    """Circulation of the gradient field around the triangle (a, b, c)."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    total = 0.0
    for p, q in ((a, b), (b, c), (c, a)):
        d = q - p
        pts = p[None, :] + s[:, None] * d[None, :]
        g = grad_fn(pts)
        total += float(w @ np.sum(g * d[None, :], axis=-1))
    return total


def kl_decompose(
    kernel: CovarianceKernel,
    grid,
    trace_fraction: float = 0.99,
    anchor=None,
    loop_tol: float = 1e-6,
) -> NoiseBasis:
    """Decompose a covariance kernel into Hamiltonian noise modes.

    Solves the symmetric eigenproblem of the block Gram matrix on the
    grid, keeps the fewest modes capturing at least ``trace_fraction`` of
    the trace, and reconstructs each scalar generator H_k by symplectic
    lowering of the mode field followed by line integration from the
    anchor (H_k(anchor) = 0, sign fixed by the anchor gradient).
    """
    if not (0.0 < trace_fraction <= 1.0):
        raise ValueError("trace_fraction must be in (0, 1]")
    G = np.atleast_2d(as_state(grid))
    N, d = G.shape
    n = d // 2
    if kernel.dim != n:
        raise DimensionMismatchError("kernel and grid dimensions differ")
    A = kernel.gram(G)
    evals, evecs = np.linalg.eigh(A)
    trace = float(np.trace(A))
    if trace <= 0:
        raise KernelNotPSDError("kernel trace is not positive on the grid")
    if evals.min() < -1e-8 * trace:
        raise KernelNotPSDError(
            f"kernel not PSD on grid: min eigenvalue {evals.min():.3e} vs trace {trace:.3e}"
        )
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    positive = np.clip(evals, 0.0, None)
    cum = np.cumsum(positive)
    K = int(np.searchsorted(cum, trace_fraction * trace) + 1)
    K = min(K, int(np.sum(positive > 1e-12 * trace)))
    K = max(K, 1)

    kept = evals[:K]
    xi = (evecs[:, :K] / np.sqrt(kept)[None, :]).T  # (K, N*2n)

    Omega = symplectic_matrix(n)
    anchor = np.zeros(d) if anchor is None else as_state(anchor)

    fields = []
    coeffs = []
    for k in range(K):
        xk = xi[k].reshape(N, d)

        def grad_fn(Z, xk=xk):
            # mode field Y(z) = sum_i alpha(z, z_i) xi_i; symplectic
            # lowering gives dH = -Omega Y
            Z = np.asarray(Z, dtype=float)
            flat = Z.reshape(-1, d)
            blocks = kernel.pairwise(flat, G)  # (M, N, d, d)
            Y = np.einsum("mnij,nj->mi", blocks, xk)
            return (-Y @ Omega.T).reshape(Z.shape)

        # sign gauge: largest-magnitude gradient component at the anchor
        # (fall back to the grid if the anchor gradient vanishes)
        ref = grad_fn(anchor)
        if np.max(np.abs(ref)) < 1e-12 * np.sqrt(kept[k]):
            ref = grad_fn(G).ravel()
        sign = 1.0 if ref[np.argmax(np.abs(ref))] > 0 else -1.0

        def signed_grad(Z, grad_fn=grad_fn, sign=sign):
            return sign * grad_fn(Z)

        # integrability: the lowered field must be closed
        rng = np.random.default_rng(1234 + k)
        scale = float(np.max(np.abs(G - anchor))) or 1.0
        for _ in range(3):
            a, b, c = anchor + rng.normal(size=(3, d)) * 0.3 * scale
            res = _loop_residue(signed_grad, a, b, c)
            mag = np.max(np.abs(signed_grad(np.stack([a, b, c])))) * 3 * scale + 1e-30
            if abs(res) > loop_tol * mag:
                raise ReconstructionError(
                    f"mode {k}: closed-loop residue {res:.3e} exceeds tolerance"
                )

        value_fn = _line_integral_value(signed_grad, anchor)
        fields.append(
            ScalarField(value_fn, signed_grad, dim=n, name=f"mode_{k}")
        )
        coeffs.append(sign * xi[k])

    captured = float(cum[K - 1] / trace)
    return NoiseBasis(
        fields=fields,
        eigenvalues=kept,
        captured_fraction=captured,
        coefficients=np.asarray(coeffs),
        grid=G,
        gram_matrix=A,
        dim=n,
    )


def rkhs_gram(kernel: CovarianceKernel, fields, grid) -> np.ndarray:
    """Gram matrix of given Hamiltonian generators under the kernel inner
    product, estimated on a grid (least-squares representer solve)."""
    G = np.atleast_2d(as_state(grid))
    N, d = G.shape
    A = kernel.gram(G)
    U = np.stack(
        [hamiltonian_vector_field(f, G).reshape(N * d) for f in fields], axis=1
    )
    XI, *_ = np.linalg.lstsq(A, U, rcond=None)
    return XI.T @ U


# ---------------------------------------------------------------------------
# the effective model


class LangevinModel:
    """Stratonovich SDE whose drift and noise coefficients are Hamiltonian
    vector fields: dz = X_{H0eff} dt + sum_k X_{Hk} o dW^k.

    Immutable after construction; evaluation is pure and thread-safe.
    """

    def __init__(self, drift_hamiltonian: ScalarField, noise_hamiltonians, *, dim=3, metadata=None):
        self.drift_hamiltonian = drift_hamiltonian
        self.noise_hamiltonians = list(noise_hamiltonians)
        self.dim = dim
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("hamiltonian", True)

    @property
    def n_modes(self) -> int:
        return len(self.noise_hamiltonians)

    def drift(self, Z) -> np.ndarray:
        return hamiltonian_vector_field(self.drift_hamiltonian, Z)

    def noise(self, Z) -> np.ndarray:
        """Noise fields stacked as (K, ..., 2n)."""
        Z = as_state(Z)
        if not self.noise_hamiltonians:
            return np.zeros((0,) + Z.shape)
        return np.stack([hamiltonian_vector_field(f, Z) for f in self.noise_hamiltonians])

    def affine_coefficients(self):
        """(A, b, Bs, cs) when every coefficient is affine in z, else None."""
        return self.metadata.get("affine")


def assemble_langevin(
    H0: ScalarField, mean_s2: ScalarField, basis: NoiseBasis | list, eps: float, tau: float,
    metadata=None,
) -> LangevinModel:
    """Scale the pieces into the physical model.

    Drift Hamiltonian H0 + (eps^2/tau) E[s2]; noise Hamiltonians scaled by
    eps/sqrt(tau).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    fields = basis.fields if isinstance(basis, NoiseBasis) else list(basis)
    drift = H0 + (eps ** 2 / tau) * mean_s2
    noise = [(eps / np.sqrt(tau)) * f for f in fields]
    return LangevinModel(drift, noise, dim=H0.dim, metadata=metadata)
