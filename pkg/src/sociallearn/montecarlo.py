"""Deviation probabilities of ``lambda_{k,i} / i`` in the replacement case.

Two estimators of ``P(lambda_{k,i}/i < s)`` (or ``> s``):

* plain Monte Carlo over independent network runs, and
* importance sampling under an exponentially tilted version of the
  pull-source chain. With ``u`` the positive eigenvector of ``A(t)^T`` the
  tilted kernel is ``Q(m -> l) = A[l, m] M_l(t) u_l / (Lambda(t) u_m)`` and the
  observation at state ``l`` is drawn from ``L_l(.|true) exp(t x) / M_l(t)``.
  A path's likelihood ratio telescopes to
  ``Lambda(t)^i * u[m_0] / u[m_i] * exp(-t * lambda_i)``.

Weights are carried in log space; ``DeviationEstimate.log_p_hat`` stays
meaningful when ``p_hat`` itself underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._random import inverse_cdf, make_rng
from .analysis import RateFunction, check_replacement, log_perron, tilted_matrix
from .engine import run_lambda_batch
from .network import check_matrix

ROW_SUM_TOL = 1e-12
_LOG_MAX = math.log(np.finfo(float).max)


class SaturationError(ValueError):
    pass


class WeightOverflowError(OverflowError):
    pass


@dataclass(frozen=True)
class TiltedProcess:
    t: float
    log_lambda: float
    u: np.ndarray
    kernel: np.ndarray
    A: np.ndarray
    model: object
    true: int
    alt: int

    @property
    def K(self) -> int:
        return self.kernel.shape[0]

    def sample_step(self, states, rng):
        """Next states and their LLRs for an array of current states."""
        nxt = inverse_cdf(self.kernel[states], rng.random(states.shape))
        obs = self.model.sample_tilted_agents(nxt, self.t, self.true, self.alt, rng)
        return nxt, self.model.llr_agents(nxt, obs, self.true, self.alt)

    def log_step_factor(self, prev, nxt, x):
        """``log f`` for one transition ``prev -> nxt`` carrying LLR ``x``."""
        log_u = np.log(self.u)
        return self.log_lambda + log_u[prev] - log_u[nxt] - self.t * x

    def log_weight(self, start, end, lam, steps):
        """Telescoped log likelihood ratio ``dP/dQ`` of a whole path."""
        log_u = np.log(self.u)
        return steps * self.log_lambda + log_u[start] - log_u[end] - self.t * lam


def build_tilted(A, model, true, alt, t) -> TiltedProcess:
    A = check_matrix(A)
    eig = log_perron(tilted_matrix(A, model, true, alt, t))
    u = eig.u
    if not np.all(u > 0):
        raise ValueError(f"Perron vector underflows at t={t}; reduce |t|")
    g = model.log_mgf_vector(t, true, alt)
    gmax = g.max()
    scaled = np.exp(g - gmax) * u
    rho = math.exp(eig.log_lambda - gmax)
    kernel = (A * scaled[:, None]).T / (rho * u)[:, None]
    worst = np.abs(kernel.sum(axis=1) - 1.0).max()
    if worst > ROW_SUM_TOL:
        raise ValueError(f"tilted kernel rows deviate from 1 by {worst:.3g}")
    kernel.setflags(write=False)
    u.setflags(write=False)
    return TiltedProcess(float(t), eig.log_lambda, u, kernel, A, model, true, alt)


def solve_tilt(rate: RateFunction, s) -> float:
    pt = rate.solve(s)[0]
    if pt.saturated:
        raise SaturationError(f"s={s} not attainable for |t| <= {rate.t_max}")
    return pt.t_star


def default_direction(rate: RateFunction, s) -> str:
    return "below" if s < rate.mean else "above"


def _hits(lam, steps, s, direction):
    if direction in ("below", "<"):
        return lam < s * steps
    if direction in ("above", ">"):
        return lam > s * steps
    raise ValueError(f"direction must be 'below' or 'above', got {direction!r}")


@dataclass(frozen=True)
class DeviationEstimate:
    agent: int
    steps: int
    s: float
    direction: str
    p_hat: float
    stderr: float
    n: int
    method: str
    log_p_hat: float
    t: float = 0.0

    @property
    def minus_log_p_over_i(self) -> float:
        return -self.log_p_hat / self.steps if self.steps else math.nan

    def row(self):
        return (
            self.s, self.steps, self.agent, self.method, self.p_hat,
            self.stderr, self.n, self.minus_log_p_over_i,
        )


DEVIATION_COLUMNS = ("s", "i", "k", "method", "p_hat", "stderr", "N", "minus_log_p_over_i")


@dataclass
class TiltedPaths:
    start: int
    end: np.ndarray
    lam: np.ndarray
    log_weight: np.ndarray
    factors: np.ndarray | None = None


def simulate_tilted(process: TiltedProcess, start, steps, n, rng, keep_factors=False) -> TiltedPaths:
    """``n`` paths of the tilted chain from ``start``; log weights accumulated step by step."""
    states = np.full(n, int(start))
    lam = np.zeros(n)
    logw = np.zeros(n)
    factors = np.empty((n, steps)) if keep_factors else None
    for j in range(steps):
        nxt, x = process.sample_step(states, rng)
        f = process.log_step_factor(states, nxt, x)
        logw += f
        if factors is not None:
            factors[:, j] = np.exp(f)
        lam += x
        states = nxt
    return TiltedPaths(int(start), states, lam, logw, factors)


def importance_estimate(process: TiltedProcess, k, steps, s, direction, n, seed=0, replication=0):
    """Importance-sampling estimate of the deviation probability for agent ``k``."""
    if n < 1:
        raise ValueError("need at least one replication")
    rng = make_rng(seed, replication)
    paths = simulate_tilted(process, k, steps, n, rng)
    logw = process.log_weight(paths.start, paths.end, paths.lam, steps)
    hit = _hits(paths.lam, steps, s, direction)
    if not hit.any():
        return DeviationEstimate(k, steps, s, direction, 0.0, 0.0, n, "importance", -math.inf, process.t)
    lw = logw[hit]
    top = lw.max()
    if top > _LOG_MAX:
        raise WeightOverflowError(
            f"path weight exp({top:.1f}) overflows; reduce |t| or the horizon"
        )
    log_p = logsumexp(lw) - math.log(n)
    scaled = np.zeros(n)
    scaled[hit] = np.exp(lw - top)
    sd = scaled.std(ddof=1) if n > 1 else 0.0
    stderr = math.exp(top) * sd / math.sqrt(n)
    return DeviationEstimate(k, steps, s, direction, math.exp(log_p), stderr, n, "importance", log_p, process.t)


def plain_estimate(model, A, k, steps, s, direction, n, seed=0, true=0, alt=1, replication=0):
    """Fraction of ``n`` untilted replacement-case runs whose ``lambda_k / i`` lies beyond ``s``."""
    if n < 1 or steps < 1:
        raise ValueError("need at least one replication and one step")
    rng = make_rng(seed, replication)
    lam = run_lambda_batch(model, A, 0.0, steps, n, rng, truth=true, alt=alt)[:, k]
    hit = _hits(lam, steps, s, direction)
    p = float(hit.mean())
    log_p = math.log(p) if p > 0 else -math.inf
    return DeviationEstimate(k, steps, s, direction, p, math.sqrt(p * (1 - p) / n), n, "plain", log_p)


def deviation(A, model, k, steps, s, n, method="importance", direction=None, seed=0,
              true=0, alt=1, rate=None, alpha=0.0, replication=0):
    """One deviation marker: picks the tilt from the rate function when sampling by importance."""
    check_replacement(alpha)
    if rate is None:
        rate = RateFunction(A, model, true, alt)
    if direction is None:
        direction = default_direction(rate, s)
    if method == "plain":
        return plain_estimate(model, A, k, steps, s, direction, n, seed, true, alt, replication)
    if method != "importance":
        raise ValueError(f"unknown method {method!r}")
    t = solve_tilt(rate, s)
    proc = build_tilted(A, model, true, alt, t)
    return importance_estimate(proc, k, steps, s, direction, n, seed, replication)
