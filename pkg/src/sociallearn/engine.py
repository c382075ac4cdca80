"""Social learning with one randomly chosen neighbor per agent per step.

Each step every agent (1) performs a local Bayesian update of its belief with
a fresh private observation and (2) takes a weighted geometric average of
that intermediate belief with the intermediate belief of a single neighbor,
drawn from its column of the combination matrix. Beliefs are kept as
log-probabilities throughout; log-belief ratios grow linearly in time and
linear-domain beliefs underflow within a few hundred steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._random import inverse_cdf, make_rng
from .network import check_matrix

SIMPLEX_TOL = 1e-10


class SimulationError(RuntimeError):
    pass


def _alpha_array(alpha, K):
    a = np.asarray(alpha, dtype=float)
    if a.ndim == 0:
        a = np.full(K, float(a))
    if a.shape != (K,):
        raise ValueError(f"alpha must be a scalar or have length {K}")
    if np.any(a < 0) or np.any(a >= 1):
        raise ValueError("confidence weight alpha must lie in [0, 1)")
    return a


@dataclass(frozen=True)
class SimConfig:
    """Run settings. ``alpha`` may be a scalar or one weight per agent."""

    steps: int
    alpha: float | tuple[float, ...] = 0.0
    seed: int = 0
    replication: int = 0
    record_draws: bool = False
    record_llr: bool = False
    truth: int = 0
    log_prior: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        a = np.asarray(self.alpha, dtype=float)
        if np.any(a < 0) or np.any(a >= 1):
            raise ValueError("confidence weight alpha must lie in [0, 1)")


def normalize(log_b):
    return log_b - logsumexp(log_b, axis=-1, keepdims=True)


def uniform_log_prior(K, n_hypotheses):
    return np.full((K, n_hypotheses), -np.log(n_hypotheses))


def adapt(log_mu, obs, model):
    """Local Bayesian update: returns intermediate log-beliefs, one row per agent."""
    return adapt_loglik(log_mu, model.loglik_all(obs))


def adapt_loglik(log_mu, loglik):
    post = np.asarray(loglik) + np.asarray(log_mu)
    if np.any(np.all(np.isneginf(post), axis=-1)):
        raise SimulationError("observation has zero likelihood under every hypothesis")
    return normalize(post)


def draw_neighbors(A, rng, size=None):
    """Neighbor chosen by each agent: ``out[..., k]`` is drawn from column ``k`` of A."""
    A = np.asarray(A)
    K = A.shape[0]
    shape = (K,) if size is None else (size, K)
    return inverse_cdf(A.T, rng.random(shape))


def draw_matrix(draws, K):
    """Realized 0/1 selection matrix with a single 1 per column."""
    M = np.zeros((K, K))
    M[draws, np.arange(K)] = 1.0
    return M


def combine(log_psi, draws, alpha):
    """Geometric average of each agent's intermediate belief with its drawn neighbor's.

    Agents with ``alpha == 0`` copy the neighbor's intermediate belief bit for bit.
    """
    log_psi = np.asarray(log_psi)
    a = _alpha_array(alpha, log_psi.shape[0])
    pulled = log_psi[draws]
    if not np.any(a):
        return pulled.copy()
    mixed = normalize(a[:, None] * log_psi + (1.0 - a)[:, None] * pulled)
    return np.where((a == 0)[:, None], pulled, mixed)


@dataclass
class Trajectory:
    """Per-step record; arrays are indexed ``[step - 1, agent, ...]`` for steps 1..T.

    ``lam[..., j]`` is the log-belief ratio against ``alternatives[j]``.
    """

    truth: int
    alternatives: tuple[int, ...]
    alpha: np.ndarray
    lam0: np.ndarray
    lam: np.ndarray
    mu_true: np.ndarray
    draws: np.ndarray | None = None
    llr: np.ndarray | None = None
    final_log_beliefs: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.lam.shape[0]

    @property
    def K(self) -> int:
        return self.lam0.shape[0]

    def rates(self) -> np.ndarray:
        """``lam / i`` for each step i."""
        i = np.arange(1, self.steps + 1, dtype=float)
        return self.lam / i[:, None, None]

    def rows(self):
        for n in range(self.steps):
            for k in range(self.K):
                for j, alt in enumerate(self.alternatives):
                    lam = float(self.lam[n, k, j])
                    yield (n + 1, k, alt, lam, lam / (n + 1), float(self.mu_true[n, k]))

    def draw_rows(self):
        if self.draws is None:
            raise SimulationError("trajectory was recorded without neighbor draws")
        for n in range(self.steps):
            for k in range(self.K):
                yield (n + 1, k, int(self.draws[n, k]))


TRAJECTORY_COLUMNS = ("step", "agent", "theta_index", "lambda", "lambda_over_step", "mu_true")
DRAW_COLUMNS = ("step", "agent", "chosen_neighbor")


def run(model, A, config: SimConfig, rng=None) -> Trajectory:
    """Simulate ``config.steps`` adapt/draw/combine rounds.

    Step order is fixed (observations for all agents, then neighbor draws) so
    a given (config, seed, replication) reproduces the trajectory exactly.
    """
    A = check_matrix(A)
    K = A.shape[0]
    if model.K != K:
        raise ValueError(f"model has {model.K} agents but A is {K}x{K}")
    H = model.n_hypotheses
    truth = config.truth
    alts = tuple(h for h in range(H) if h != truth)
    alpha = _alpha_array(config.alpha, K)
    if rng is None:
        rng = make_rng(config.seed, config.replication)

    if config.log_prior is None:
        log_mu = uniform_log_prior(K, H)
    else:
        log_mu = np.array(config.log_prior, dtype=float)
        if log_mu.shape != (K, H) or not np.all(np.isfinite(log_mu)):
            raise ValueError("log prior must be finite with shape (K, n_hypotheses)")
        log_mu = normalize(log_mu)

    T = config.steps
    lam0 = log_mu[:, [truth]] - log_mu[:, alts]
    lam = np.empty((T, K, len(alts)))
    mu_true = np.empty((T, K))
    draws = np.empty((T, K), dtype=int) if config.record_draws else None
    llr = np.empty((T, K, len(alts))) if config.record_llr else None

    for n in range(T):
        obs = model.sample_all(truth, rng)
        loglik = model.loglik_all(obs)
        log_psi = adapt_loglik(log_mu, loglik)
        ell = draw_neighbors(A, rng)
        log_mu = combine(log_psi, ell, alpha)
        lam[n] = log_mu[:, [truth]] - log_mu[:, alts]
        if not np.all(np.isfinite(lam[n])):
            raise SimulationError(f"non-finite log-belief ratio at step {n + 1}")
        mu_true[n] = np.exp(log_mu[:, truth])
        if draws is not None:
            draws[n] = ell
        if llr is not None:
            idx = np.arange(K)
            for j, alt in enumerate(alts):
                llr[n, :, j] = model.llr_agents(idx, obs, truth, alt)

    return Trajectory(
        truth=truth,
        alternatives=alts,
        alpha=alpha,
        lam0=lam0,
        lam=lam,
        mu_true=mu_true,
        draws=draws,
        llr=llr,
        final_log_beliefs=log_mu,
    )


def lambda_recursion(lam0, draws, llr, alpha):
    """Propagate log-belief ratios directly:
    ``lam_k <- alpha_k (x_k + lam_k) + (1 - alpha_k) (x_l + lam_l)`` with ``l`` the draw of k.
    """
    lam0 = np.asarray(lam0, dtype=float)
    K = lam0.shape[0]
    a = _alpha_array(alpha, K)[:, None]
    out = np.empty((draws.shape[0],) + lam0.shape)
    prev = lam0
    for n in range(draws.shape[0]):
        z = llr[n] + prev
        prev = a * z + (1.0 - a) * z[draws[n]]
        out[n] = prev
    return out


@dataclass(frozen=True)
class RecursionCheck:
    ok: bool
    first_bad_step: int | None = None
    max_abs_error: float = 0.0

    def __bool__(self):
        return self.ok


def lambda_recursion_check(traj: Trajectory, tol: float = 1e-9) -> RecursionCheck:
    """Compare the belief-domain ratios with the direct ratio recursion, step by step.

    ``first_bad_step`` is 1-based.
    """
    if traj.draws is None or traj.llr is None:
        raise SimulationError("recursion check needs recorded draws and LLRs")
    ref = lambda_recursion(traj.lam0, traj.draws, traj.llr, traj.alpha)
    err = np.abs(ref - traj.lam).reshape(traj.steps, -1).max(axis=1, initial=0.0)
    bad = np.flatnonzero(~(err <= tol))
    if bad.size:
        return RecursionCheck(False, int(bad[0]) + 1, float(np.nanmax(err)))
    return RecursionCheck(True, None, float(err.max(initial=0.0)))


def weight_average_diagnostic(A, alpha, horizon, rng, start=0):
    """Running average ``(1/i) sum_n w_n`` with ``w_n = (J + A_n (I - J)) w_{n-1}``, ``w_0 = e_start``.

    ``J = diag(alpha)``; ``A_n`` are independent realized selection matrices.
    The average converges to the Perron vector of ``J + A (I - J)``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    A = check_matrix(A)
    K = A.shape[0]
    a = _alpha_array(alpha, K)
    w = np.zeros(K)
    w[start] = 1.0
    acc = np.zeros(K)
    block = 4096
    done = 0
    while done < horizon:
        n = min(block, horizon - done)
        ells = draw_neighbors(A, rng, size=n)
        for ell in ells:
            w = a * w + np.bincount(ell, weights=(1.0 - a) * w, minlength=K)
            acc += w
        done += n
    return acc / horizon


def run_lambda_batch(model, A, alpha, steps, n_paths, rng, truth=0, alt=1, start_lam=None):
    """Log-belief ratios of all agents after ``steps`` rounds, for ``n_paths`` independent runs.

    Runs the ratio recursion directly (no belief vectors), vectorized over runs.
    Returns an array of shape ``(n_paths, K)``.
    """
    A = check_matrix(A)
    K = A.shape[0]
    a = _alpha_array(alpha, K)
    lam = np.zeros((n_paths, K)) if start_lam is None else np.array(start_lam, dtype=float)
    agents = np.broadcast_to(np.arange(K), (n_paths, K))
    rows = np.arange(n_paths)[:, None]
    for _ in range(steps):
        obs = model.sample_agents(agents, truth, rng)
        x = model.llr_agents(agents, obs, truth, alt)
        ell = inverse_cdf(A.T, rng.random((n_paths, K)))
        z = x + lam
        lam = a * z + (1.0 - a) * z[rows, ell]
    return lam
