"""Hypothesis spaces and per-agent observation models.

Two likelihood families share one interface: unit-variance Gaussians with a
mean per (agent, hypothesis), and categorical distributions over a finite
alphabet. Hypotheses are referred to by integer index; all logs are natural.

Every method that takes an ``agents`` array is vectorized over it, which is
what the simulators use. The per-agent scalar helpers (``llr``, ``llr_mgf``,
``divergence_vector``) are thin wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._random import inverse_cdf as _inverse_cdf

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class HypothesisSpace:
    labels: tuple[str, ...]
    truth: int = 0

    def __post_init__(self):
        if len(self.labels) < 2:
            raise ModelError("need at least two hypotheses")
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("hypothesis labels must be distinct")
        if not 0 <= self.truth < len(self.labels):
            raise ModelError(f"true hypothesis index {self.truth} out of range")

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def alternatives(self) -> list[int]:
        return [h for h in range(self.size) if h != self.truth]

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        return self.labels.index(str(label))


class ObservationModel:
    """Base class: ``L_k(.|theta)`` for every agent ``k`` and hypothesis ``theta``."""

    K: int
    n_hypotheses: int

    # -- vectorized primitives, implemented by subclasses ----------------
    def sample_agents(self, agents, theta, rng):
        raise NotImplementedError

    def loglik_agents(self, agents, obs) -> np.ndarray:
        """Log-likelihoods, shape ``agents.shape + (n_hypotheses,)``."""
        raise NotImplementedError

    def log_mgf_agents(self, agents, t, true, alt) -> np.ndarray:
        raise NotImplementedError

    def divergence_agents(self, agents, true, alt) -> np.ndarray:
        raise NotImplementedError

    def sample_tilted_agents(self, agents, t, true, alt, rng):
        """Draw observations whose law is ``L(xi|true) exp(t x(xi)) / M(t)``."""
        raise NotImplementedError

    # -- derived ----------------------------------------------------------
    def llr_agents(self, agents, obs, true, alt) -> np.ndarray:
        ll = self.loglik_agents(agents, obs)
        lt, la = ll[..., true], ll[..., alt]
        if np.any(np.isneginf(lt)):
            raise ModelError("observation has zero likelihood under the true hypothesis")
        return lt - la

    def sample(self, k, theta, rng, size=None):
        agents = np.full(() if size is None else size, k, dtype=int)
        return self.sample_agents(agents, theta, rng)

    def llr(self, k, obs, true, alt) -> float | np.ndarray:
        obs = np.asarray(obs)
        agents = np.full(obs.shape, k, dtype=int)
        out = self.llr_agents(agents, obs, true, alt)
        return float(out) if out.ndim == 0 else out

    def log_mgf(self, k, t, true, alt) -> float:
        return float(self.log_mgf_agents(np.asarray(k), float(t), true, alt))

    def llr_mgf(self, k, t, true, alt) -> float:
        """``E[exp(t x_k)]`` under ``true``, where ``x_k`` is agent k's LLR."""
        val = np.exp(self.log_mgf(k, t, true, alt))
        if not np.isfinite(val):
            raise ModelError(f"moment generating function overflows at t={t}")
        return float(val)

    def log_mgf_vector(self, t, true, alt) -> np.ndarray:
        return self.log_mgf_agents(np.arange(self.K), float(t), true, alt)

    def log_mgf_grid(self, ts, true, alt) -> np.ndarray:
        """``log M_k(t)`` for every ``t`` in ``ts`` (rows) and every agent (columns)."""
        agents = np.arange(self.K)
        return np.stack([self.log_mgf_agents(agents, float(t), true, alt) for t in ts])

    def divergence_vector(self, true, alt) -> np.ndarray:
        """Per-agent ``D_KL(L_k(.|true) || L_k(.|alt))`` in nats; may contain ``inf``."""
        return self.divergence_agents(np.arange(self.K), true, alt)

    def is_identifiable(self, true) -> bool:
        return all(
            np.any(self.divergence_vector(true, alt) > 0)
            for alt in range(self.n_hypotheses)
            if alt != true
        )

    def sample_all(self, theta, rng):
        """One observation per agent, independent across agents."""
        return self.sample_agents(np.arange(self.K), theta, rng)

    def loglik_all(self, obs) -> np.ndarray:
        return self.loglik_agents(np.arange(self.K), obs)


class GaussianModel(ObservationModel):
    """Unit-variance Gaussian likelihoods; ``means[k, h]`` is agent k's mean under h."""

    family = "gaussian"

    def __init__(self, means):
        means = np.array(means, dtype=float)
        if means.ndim != 2 or means.shape[1] < 2:
            raise ModelError("means must have shape (K, n_hypotheses >= 2)")
        if not np.all(np.isfinite(means)):
            raise ModelError("means must be finite")
        means.setflags(write=False)
        self.means = means
        self.K, self.n_hypotheses = means.shape

    @classmethod
    def shifted(cls, nu):
        """Mean 0 under hypothesis 0 and mean ``nu[k]`` under hypothesis 1."""
        nu = np.asarray(nu, dtype=float)
        return cls(np.column_stack([np.zeros_like(nu), nu]))

    def _gap(self, agents, true, alt):
        return self.means[agents, true] - self.means[agents, alt]

    def sample_agents(self, agents, theta, rng):
        agents = np.asarray(agents)
        return self.means[agents, theta] + rng.standard_normal(agents.shape)

    def loglik_agents(self, agents, obs):
        agents = np.asarray(agents)
        z = np.asarray(obs, dtype=float)[..., None] - self.means[agents]
        return -0.5 * z * z - _LOG_SQRT_2PI

    def llr_agents(self, agents, obs, true, alt):
        # closed form: gap*(xi - m_true) + gap^2/2, avoids cancellation
        agents = np.asarray(agents)
        gap = self._gap(agents, true, alt)
        return gap * (np.asarray(obs, dtype=float) - self.means[agents, true]) + 0.5 * gap * gap

    def log_mgf_agents(self, agents, t, true, alt):
        g2 = self._gap(np.asarray(agents), true, alt) ** 2
        return 0.5 * g2 * t * (1.0 + t)

    def log_mgf_grid(self, ts, true, alt):
        g2 = self._gap(np.arange(self.K), true, alt) ** 2
        ts = np.asarray(ts, dtype=float)[:, None]
        return 0.5 * g2 * ts * (1.0 + ts)

    def divergence_agents(self, agents, true, alt):
        return 0.5 * self._gap(np.asarray(agents), true, alt) ** 2

    def sample_tilted_agents(self, agents, t, true, alt, rng):
        # tilting by exp(t * llr) shifts the mean by t * gap
        agents = np.asarray(agents)
        mean = self.means[agents, true] + t * self._gap(agents, true, alt)
        return mean + rng.standard_normal(agents.shape)

    def tilted_llr_moments(self, k, t, true, alt):
        """Mean and variance of agent k's LLR under the tilted law."""
        g2 = float(self._gap(np.asarray(k), true, alt)) ** 2
        return 0.5 * g2 + t * g2, g2

    def to_config(self) -> dict:
        return {"family": self.family, "means": self.means.tolist()}


class CategoricalModel(ObservationModel):
    """Finite-alphabet likelihoods; ``probs[k, h, :]`` is a probability vector."""

    family = "categorical"

    def __init__(self, probs, atol: float = 1e-12):
        probs = np.array(probs, dtype=float)
        if probs.ndim != 3 or probs.shape[1] < 2:
            raise ModelError("probs must have shape (K, n_hypotheses >= 2, n_symbols)")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ModelError("probabilities must be finite and non-negative")
        if np.any(np.abs(probs.sum(axis=-1) - 1.0) > atol):
            raise ModelError("each categorical row must sum to 1")
        probs.setflags(write=False)
        self.probs = probs
        self.K, self.n_hypotheses, self.n_symbols = probs.shape
        with np.errstate(divide="ignore"):
            self.logp = np.log(probs)
        self.logp.setflags(write=False)

    def check_support(self, true):
        """Raise unless every outcome possible under ``true`` is possible under all hypotheses."""
        live = self.probs[:, true, :] > 0
        dead = np.any(live[:, None, :] & (self.probs <= 0), axis=(1, 2))
        if np.any(dead):
            raise ModelError(
                f"agents {np.flatnonzero(dead).tolist()} violate absolute continuity "
                "with respect to the true hypothesis"
            )

    def sample_agents(self, agents, theta, rng):
        agents = np.asarray(agents)
        return _inverse_cdf(self.probs[agents, theta], rng.random(agents.shape))

    def loglik_agents(self, agents, obs):
        agents = np.asarray(agents)
        obs = np.asarray(obs, dtype=int)
        if np.any(obs < 0) or np.any(obs >= self.n_symbols):
            raise ModelError("categorical observation out of range")
        return self.logp[agents, :, obs]

    def _llr_table(self, agents, true, alt):
        lt = self.logp[agents, true]
        la = self.logp[agents, alt]
        live = np.isfinite(lt)
        if np.any(live & ~np.isfinite(la)):
            return lt, None
        with np.errstate(invalid="ignore"):
            return lt, np.where(live, lt - la, 0.0)

    def log_mgf_agents(self, agents, t, true, alt):
        agents = np.asarray(agents)
        lt, x = self._llr_table(agents, true, alt)
        if x is None:
            if t > 0:
                raise ModelError(f"moment generating function is infinite at t={t}")
            raise ModelError("absolute continuity violated; LLR is unbounded")
        return logsumexp(lt + t * x, axis=-1, b=np.isfinite(lt))

    def divergence_agents(self, agents, true, alt):
        agents = np.asarray(agents)
        p = self.probs[agents, true]
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(p > 0, p * (self.logp[agents, true] - self.logp[agents, alt]), 0.0)
        return terms.sum(axis=-1)

    def tilted_probs(self, agents, t, true, alt) -> np.ndarray:
        agents = np.asarray(agents)
        lt, x = self._llr_table(agents, true, alt)
        if x is None:
            raise ModelError("absolute continuity violated; cannot tilt")
        logq = np.where(np.isfinite(lt), lt + t * x, -np.inf)
        logq = logq - logsumexp(logq, axis=-1, keepdims=True)
        return np.exp(logq)

    def sample_tilted_agents(self, agents, t, true, alt, rng):
        agents = np.asarray(agents)
        q = self.tilted_probs(agents, t, true, alt)
        return _inverse_cdf(q, rng.random(agents.shape))

    def to_config(self) -> dict:
        return {"family": self.family, "probs": self.probs.tolist()}

