"""Stratonovich integration of the coarse-grained models as a stochastic flow.

Increments come from a counter-based generator (Philox) keyed by
(seed, stream id) with the step index in the counter, so any worker can
regenerate any step's noise without communication; a fixed particle-chunk
size makes results independent of the worker count.  Shared-noise mode
applies one increment vector per step to every particle, which is what
makes two-particle statistics meaningful.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .errors import MidpointConvergenceError, NonFiniteError
from .phase import as_state

CHUNK = 4096  # particles per increment chunk; fixed so results do not
              # depend on how chunks are assigned to workers


class WienerStream:
    """Deterministic Wiener increments keyed by (seed, stream_id, step).

    ``shared(step, k, dt)`` returns one increment vector reused by every
    particle; ``independent(step, chunk, shape, dt)`` returns a fresh block
    for one particle chunk.  Identical keys always reproduce identical
    sequences.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF

    def _gen(self, counter) -> Generator:
        return Generator(Philox(key=[self.seed, self.stream_id], counter=counter))

    def shared(self, step: int, k: int, dt: float) -> np.ndarray:
        g = self._gen([0, 0, 0, int(step)])
        return g.standard_normal(k) * np.sqrt(dt)

    def independent(self, step: int, chunk: int, shape, dt: float) -> np.ndarray:
        g = self._gen([1, int(chunk), 0, int(step)])
        return g.standard_normal(shape) * np.sqrt(dt)


def _apply_noise(B: np.ndarray, dW: np.ndarray) -> np.ndarray:
    """Contract noise fields (K, P, 2n) with increments (K,) or (P, K)."""
    if dW.ndim == 1:
        return np.einsum("kpd,k->pd", B, dW)
    return np.einsum("kpd,pk->pd", B, dW)


def stratonovich_step(model, z, dt: float, dW: np.ndarray, scheme: str = "heun") -> np.ndarray:
    """One Stratonovich step for a batch of states.

    heun: explicit predictor-corrector (midpoint average of the fields).
    implicit_midpoint: fixed-point solve of the midpoint rule (at most 50
    iterations, tolerance 1e-12), which preserves symplecticity for
    linear Hamiltonian fields.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    Z = np.atleast_2d(as_state(z))
    dW = np.asarray(dW, dtype=float)
    if scheme == "heun":
        F0 = model.drift(Z)
        B0 = model.noise(Z)
        zstar = Z + dt * F0 + _apply_noise(B0, dW)
        F1 = model.drift(zstar)
        B1 = model.noise(zstar)
        out = Z + 0.5 * dt * (F0 + F1) + 0.5 * (_apply_noise(B0, dW) + _apply_noise(B1, dW))
    elif scheme == "implicit_midpoint":
        out = Z.copy()
        for it in range(50):
            zm = 0.5 * (Z + out)
            nxt = Z + dt * model.drift(zm) + _apply_noise(model.noise(zm), dW)
            delta = float(np.max(np.abs(nxt - out)))
            out = nxt
            if delta <= 1e-12:
                break
        else:
            raise MidpointConvergenceError(
                f"implicit midpoint did not converge (last delta {delta:.3e})"
            )
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise NonFiniteError(f"non-finite state produced (particle {bad[0]})")
    return out if np.asarray(z).ndim > 1 else out[0]


@dataclass
class EnsembleTrajectories:
    """Stored snapshots of an ensemble evolution.

    ``states[time_index, particle]`` is a phase point; in shared mode all
    particles consumed the same Wiener increments at every step.
    """

    states: np.ndarray  # (M, P, 2n)
    times: np.ndarray  # (M,)
    dt: float
    mode: str
    dim: int

    @property
    def n_particles(self) -> int:
        return self.states.shape[1]


def _simulate_chunk(model, Z0, nsteps, dt, stream, mode, scheme, chunk_index, store_mask):
    Z = Z0.copy()
    K = model.n_modes
    stored = [Z.copy()] if store_mask[0] else []
    for step in range(nsteps):
        if mode == "shared":
            dW = stream.shared(step, K, dt)
        else:
            dW = stream.independent(step, chunk_index, (Z.shape[0], K), dt)
        try:
            Z = stratonovich_step(model, Z, dt, dW, scheme)
        except (NonFiniteError, MidpointConvergenceError) as exc:
            raise type(exc)(f"step {step + 1}: {exc}") from exc
        if store_mask[step + 1]:
            stored.append(Z.copy())
    return np.stack(stored)


def simulate_flow(
    model,
    initial,
    T: float,
    dt: float,
    seed: int,
    mode: str = "shared",
    scheme: str = "heun",
    *,
    stream_id: int = 0,
    store_stride: int = 1,
    workers: int = 1,
) -> EnsembleTrajectories:
    """Integrate an ensemble under one realization of the noise.

    ``mode='shared'`` draws one increment vector per step for all
    particles (a stochastic flow); ``'independent'`` gives every particle
    its own increments.  Same seed, scheme and a single worker give
    bit-identical trajectories; the worker count never changes the
    increments, only the scheduling.
    """
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if mode not in ("shared", "independent"):
        raise ValueError(f"unknown mode {mode!r}")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T/dt must be an integer after rounding")
    Z0 = np.atleast_2d(as_state(initial)).astype(float)
    P = Z0.shape[0]
    stream = WienerStream(seed, stream_id)

    store_mask = np.zeros(nsteps + 1, dtype=bool)
    store_mask[:: max(1, int(store_stride))] = True
    store_mask[0] = store_mask[nsteps] = True
    times = dt * np.flatnonzero(store_mask)

    chunks = [(c, Z0[lo : lo + CHUNK]) for c, lo in enumerate(range(0, P, CHUNK))]
    run = lambda item: _simulate_chunk(
        model, item[1], nsteps, dt, stream, mode, scheme, item[0], store_mask
    )
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(item) for item in chunks]
    states = np.concatenate(parts, axis=1)
    return EnsembleTrajectories(states=states, times=times, dt=dt, mode=mode, dim=model.dim)


# ---------------------------------------------------------------------------
# moment estimation


@dataclass
class MomentSeries:
    """Per-time moments of observables with standard errors."""

    times: np.ndarray
    mean: dict
    mean_stderr: dict
    var: dict
    var_stderr: dict


def estimate_statistics(traj: EnsembleTrajectories, observables: dict) -> MomentSeries:
    """Mean and variance time series of scalar observables.

    Each observable maps a state block (P, 2n) to values (P,).  Variance
    standard errors use the Gaussian approximation var * sqrt(2/(P-1)).
    """
    P = traj.n_particles
    if P < 2:
        raise ValueError("need at least 2 particles for variances")
    mean, mean_se, var, var_se = {}, {}, {}, {}
    for name, fn in observables.items():
        vals = np.stack([np.asarray(fn(Zt)) for Zt in traj.states])  # (M, P)
        mean[name] = vals.mean(axis=1)
        sd = vals.std(axis=1, ddof=1)
        mean_se[name] = sd / np.sqrt(P)
        var[name] = sd ** 2
        var_se[name] = sd ** 2 * np.sqrt(2.0 / (P - 1))
    return MomentSeries(traj.times, mean, mean_se, var, var_se)


def pair_difference_stats(traj: EnsembleTrajectories, observable) -> MomentSeries:
    """Statistics of obs(z_{2i}) - obs(z_{2i+1}) over consecutive pairs.

    Meaningful in shared mode, where the difference isolates the spatial
    decorrelation of the driving noise.
    """
    if traj.n_particles % 2:
        raise ValueError("pair statistics need an even particle count")
    npairs = traj.n_particles // 2
    vals = np.empty((len(traj.times), npairs))
    for i, Zt in enumerate(traj.states):
        obs = np.asarray(observable(Zt))
        vals[i] = obs[0::2] - obs[1::2]
    sd = vals.std(axis=1, ddof=1)
    return MomentSeries(
        traj.times,
        {"diff": vals.mean(axis=1)},
        {"diff": sd / np.sqrt(npairs)},
        {"diff": sd ** 2},
        {"diff": sd ** 2 * np.sqrt(2.0 / (npairs - 1))},
    )


# ---------------------------------------------------------------------------
# closed moment equations for affine models


def fp_moment_prediction(model, mean0, second0, T: float, n_out: int = 50):
    """First and second moments implied by the model's forward equation.

    Valid only when every coefficient field is affine in z (the closed
    moment hierarchy).  Returns (times, mean (M, 2n), second (M, 2n, 2n),
    cov (M, 2n, 2n)).  Non-affine models raise ModelNotAffineError; use a
    Monte-Carlo comparison for those.
    """
    from scipy.integrate import solve_ivp

    from .errors import ModelNotAffineError

    aff = model.affine_coefficients()
    if aff is None:
        raise ModelNotAffineError(
            "model coefficients are not affine in z; compare against "
            "simulate_flow statistics instead"
        )
    A, b, Bs, cs = aff
    d = A.shape[0]
    # Stratonovich -> Ito drift correction for affine fields
    A_ito = A + 0.5 * sum(Bk @ Bk for Bk in Bs) if Bs else A.copy()
    b_ito = b + 0.5 * sum(Bk @ ck for Bk, ck in zip(Bs, cs)) if Bs else b.copy()

    m0 = np.asarray(mean0, dtype=float)
    S0 = np.asarray(second0, dtype=float)

    def rhs(_, y):
        m = y[:d]
        S = y[d:].reshape(d, d)
        dm = A_ito @ m + b_ito
        dS = A_ito @ S + S @ A_ito.T + np.outer(b_ito, m) + np.outer(m, b_ito)
        for Bk, ck in zip(Bs, cs):
            dS += Bk @ S @ Bk.T
            dS += np.outer(Bk @ m, ck) + np.outer(ck, Bk @ m)
            dS += np.outer(ck, ck)
        return np.concatenate([dm, dS.ravel()])

    times = np.linspace(0.0, T, n_out)
    sol = solve_ivp(
        rhs,
        (0.0, T),
        np.concatenate([m0, S0.ravel()]),
        t_eval=times,
        rtol=1e-10,
        atol=1e-12,
        method="RK45",
    )
    mean = sol.y[:d].T
    second = sol.y[d:].T.reshape(-1, d, d)
    cov = second - np.einsum("ti,tj->tij", mean, mean)
    return times, mean, second, cov
