"""Asymptotic learning rate and large-deviation quantities for the replacement case.

With ``alpha = 0`` the agent whose belief ends up at node k after i steps is
traced by a finite Markov chain on agents (move from m to l with probability
``A[l, m]``), and the log-belief ratio is the accumulated LLR reward along
that chain. Its scaled cumulant generating function is ``log Lambda(t)``, the
log Perron eigenvalue of the tilted matrix ``A(t)[l, k] = A[l, k] M_l(t)``;
the rate function is the Legendre transform of that.

Eigenvalues come from power iteration on ``A(t)^T``, vectorized over many
tilts at once. Rows of ``A(t)`` are rescaled by ``exp(-max_l log M_l(t))``
so that tilts up to |t| = 50 stay in floating-point range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .network import ConvergenceError, POWER_MAXITER, check_matrix

FD_STEP = 1e-5
T_MAX = 50.0
EIG_RTOL = 1e-13
# warm start: power steps with S^(2^SQUARINGS) before the plain iteration
SQUARINGS = 6
_WARM_MAX_ENTRIES = 4_000_000
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class LdpApplicabilityWarning(UserWarning):
    """Large-deviation results are derived for the replacement case only."""


def check_replacement(alpha) -> None:
    if np.any(np.asarray(alpha, dtype=float) != 0):
        warnings.warn(
            "large-deviation results assume alpha = 0 (replacement); for alpha > 0 "
            "the ratio process is driven by a continuous-state chain",
            LdpApplicabilityWarning,
            stacklevel=3,
        )


def asymptotic_rate(pi, d) -> float:
    """Almost-sure limit of ``lambda_{k,i} / i``: ``<pi, d>``."""
    pi = np.asarray(pi, dtype=float)
    d = np.asarray(d, dtype=float)
    if pi.shape != d.shape:
        raise ValueError(f"dimension mismatch: pi {pi.shape} vs d {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("divergence vector has infinite entries; rate undefined")
    return float(pi @ d)


@dataclass(frozen=True)
class TiltedMatrix:
    """``A(t) = diag(M(t)) A`` held as ``A`` plus ``log M(t)``."""

    t: float
    A: np.ndarray
    log_mgf: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        with np.errstate(over="raise"):
            return np.exp(self.log_mgf)[:, None] * self.A


def tilted_matrix(A, model, true, alt, t) -> TiltedMatrix:
    A = check_matrix(A)
    g = model.log_mgf_vector(t, true, alt)
    if not np.all(np.isfinite(g)):
        raise ValueError(f"LLR moment generating function is not finite at t={t}")
    return TiltedMatrix(float(t), A, g)


@dataclass(frozen=True)
class EigenData:
    """Perron data of ``A(t)``: ``sum_l A[l,k] M_l(t) u_l = Lambda(t) u_k``, ``max(u) = 1``."""

    t: float
    log_lambda: float
    u: np.ndarray
    residual: float
    iterations: int

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)


def _warm_start(A, W, U, steps=8):
    """A few power steps with a high power of ``S_b = diag(W_b) A``.

    Only the direction of ``U`` matters; the caller's Collatz-Wielandt loop on
    ``S_b`` itself decides convergence, so this changes speed, not accuracy.
    """
    P = W[:, :, None] * A[None, :, :]
    for _ in range(SQUARINGS):
        P = P @ P
        P /= P.max(axis=(1, 2), keepdims=True)
    for _ in range(steps):
        V = np.einsum("bl,blk->bk", U, P)
        top = V.max(axis=1, keepdims=True)
        if not np.all(top > 0):
            return U
        U = V / top
    # underflowed entries would stall the bracket; keep the start strictly positive
    return np.maximum(U, 1e-300)


def _perron_batch(A, G, rtol=EIG_RTOL, maxiter=POWER_MAXITER, u0=None):
    """Power iteration on ``diag(exp(G_b)) A`` transposed, for every row ``G_b``.

    Convergence is judged by the Collatz-Wielandt bracket
    ``min_k (S^T u)_k / u_k <= rho <= max_k (S^T u)_k / u_k``.
    Returns ``(log_rho, u, gap, iterations)`` with ``u`` max-normalized.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    B, K = G.shape
    gmax = G.max(axis=1)
    W = np.exp(G - gmax[:, None])
    U = np.ones((B, K)) if u0 is None else np.array(u0, dtype=float)
    if u0 is None and B * K * K <= _WARM_MAX_ENTRIES:
        U = _warm_start(A, W, U)
    lo = np.zeros(B)
    hi = np.full(B, np.inf)
    done = np.zeros(B, dtype=bool)
    for it in range(1, maxiter + 1):
        V = (W * U) @ A
        pos = U > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(pos, V / np.where(pos, U, 1.0), np.nan)
        lo = np.nanmin(R, axis=1)
        hi = np.nanmax(R, axis=1)
        done = hi <= lo * (1.0 + rtol)
        U = V / V.max(axis=1, keepdims=True)
        if done.all():
            break
    else:
        raise ConvergenceError(
            f"Perron power iteration did not converge in {maxiter} iterations "
            f"(worst bracket {np.max(hi / lo - 1):.3g})"
        )
    log_rho = gmax + 0.5 * (np.log(lo) + np.log(hi))
    return log_rho, U, hi / lo - 1.0, it


def log_perron(tilted: TiltedMatrix) -> EigenData:
    log_rho, U, gap, it = _perron_batch(tilted.A, tilted.log_mgf[None, :])
    u = U[0]
    # residual of the scaled eigen equation, relative to the eigenvalue
    gmax = tilted.log_mgf.max()
    w = np.exp(tilted.log_mgf - gmax)
    rho = math.exp(log_rho[0] - gmax)
    res = float(np.abs((w * u) @ tilted.A - rho * u).max() / rho)
    return EigenData(tilted.t, float(log_rho[0]), u, res, it)


@dataclass(frozen=True)
class RatePoint:
    s: float
    value: float
    t_star: float
    saturated: bool


class RateFunction:
    """``I(s) = sup_t (s t - log Lambda(t))`` for one (true, alternative) pair.

    The maximizer is found by bisection on ``s - (log Lambda)'(t)`` over
    ``[-t_max, t_max]``; the derivative is a central difference with step
    ``fd_step``. Values of ``s`` outside the derivative's range on that window
    are reported at the boundary tilt and flagged as saturated.
    """

    def __init__(self, A, model, true=0, alt=1, t_max=T_MAX, fd_step=FD_STEP, alpha=0.0):
        check_replacement(alpha)
        self.A = check_matrix(A)
        if model.K != self.A.shape[0]:
            raise ValueError("model and combination matrix disagree on the number of agents")
        self.model = model
        self.true = true
        self.alt = alt
        self.t_max = float(t_max)
        self.fd_step = float(fd_step)
        self._agents = np.arange(model.K)
        d_lo, d_hi = self.dlog_lambda(np.array([-self.t_max, self.t_max]))
        self.s_range = (float(d_lo), float(d_hi))

    def log_mgf(self, t) -> np.ndarray:
        return self.model.log_mgf_grid(np.atleast_1d(np.asarray(t, dtype=float)), self.true, self.alt)

    def log_lambda(self, t):
        """``log Lambda(t)``, vectorized over ``t``."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        out, _, _, _ = _perron_batch(self.A, self.log_mgf(flat))
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def dlog_lambda(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        h = self.fd_step
        both = self.log_lambda(np.concatenate([flat + h, flat - h]))
        d = (both[: flat.size] - both[flat.size :]) / (2 * h)
        return d.reshape(t.shape) if t.ndim else float(d[0])

    @property
    def mean(self) -> float:
        """``(log Lambda)'(0)``, the almost-sure limit of ``lambda_i / i``."""
        return float(self.dlog_lambda(0.0))

    def solve(self, s, tol=1e-12) -> list[RatePoint]:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lo = np.full(s.shape, -self.t_max)
        hi = np.full(s.shape, self.t_max)
        below = s <= self.s_range[0]
        above = s >= self.s_range[1]
        active = ~(below | above)
        while np.any(active & (hi - lo > tol)):
            idx = np.flatnonzero(active & (hi - lo > tol))
            mid = 0.5 * (lo[idx] + hi[idx])
            go_up = self.dlog_lambda(mid) < s[idx]
            lo[idx] = np.where(go_up, mid, lo[idx])
            hi[idx] = np.where(go_up, hi[idx], mid)
        t_star = np.where(below, -self.t_max, np.where(above, self.t_max, 0.5 * (lo + hi)))
        vals = s * t_star - self.log_lambda(t_star)
        # the sup also covers t = 0, where s*t - log Lambda(t) is exactly 0
        vals = np.maximum(vals, 0.0)
        return [RatePoint(float(a), float(b), float(c), bool(d)) for a, b, c, d in zip(s, vals, t_star, below | above)]

    def __call__(self, s):
        pts = self.solve(s)
        if np.ndim(s) == 0:
            return pts[0].value
        return np.array([p.value for p in pts])

    def t_star(self, s) -> float:
        return self.solve(s)[0].t_star

    def table(self, s_grid) -> list[tuple]:
        """Rows ``(s, I(s), t_star, saturated)``."""
        s_grid = np.asarray(s_grid, dtype=float)
        if s_grid.size == 0:
            raise ValueError("empty s grid")
        return [(p.s, p.value, p.t_star, p.saturated) for p in self.solve(s_grid)]


def rate_function(A, model, true=0, alt=1, **kw) -> RateFunction:
    return RateFunction(A, model, true, alt, **kw)


RATE_COLUMNS = ("s", "I", "t_star", "saturated")


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed)):
            raise ValueError(f"empty interval {self}")

    @property
    def has_interior(self) -> bool:
        return self.lo < self.hi


def _golden_min(f, a, b, tol=1e-10):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return min((f(a), a), (f(b), b), (fc, c), (fd, d))


def interval_infimum(rate: RateFunction, lo, hi, n_grid=201) -> float:
    """``min I`` over the closed interval ``[lo, hi]`` (infinite ends allowed)."""
    m = rate.mean
    a = lo if math.isfinite(lo) else min(hi, m) - 1.0
    b = hi if math.isfinite(hi) else max(lo, m) + 1.0
    if a == b:
        return float(rate(a))
    grid = np.linspace(a, b, n_grid)
    vals = rate(grid)
    j = int(np.argmin(vals))
    left, right = grid[max(j - 1, 0)], grid[min(j + 1, n_grid - 1)]
    best, _ = _golden_min(lambda x: float(rate(x)), left, right)
    return float(min(best, vals[j]))


@dataclass(frozen=True)
class LdpBounds:
    """Asymptotic bounds ``lower <= (1/i) log P(lambda_i / i in G) <= upper``."""

    lower: float
    upper: float

    def probability_scale(self, horizon):
        return math.exp(horizon * self.lower), math.exp(horizon * self.upper)


def ldp_interval_bounds(rate: RateFunction, interval: Interval, horizon=None) -> LdpBounds:
    """``(-inf over interior of I, -inf over closure of I)``.

    ``I`` is finite and convex, hence continuous, so both infima agree unless
    the interval has no interior.
    """
    closure = interval_infimum(rate, interval.lo, interval.hi)
    interior = closure if interval.has_interior else math.inf
    return LdpBounds(-interior, -closure)


@dataclass(frozen=True)
class ErrorExponent:
    """Decay exponents of the maximum-likelihood decision error probability.

    ``liminf (1/i) log P(error) >= -liminf_exponent`` and
    ``limsup (1/i) log P(error) <= -limsup_exponent``; neither depends on the agent.
    """

    liminf_exponent: float
    limsup_exponent: float
    identifiable: bool
    per_alternative: dict


def error_exponent(A, model, true=0, alpha=0.0, **kw) -> ErrorExponent:
    check_replacement(alpha)
    if not model.is_identifiable(true):
        return ErrorExponent(0.0, 0.0, False, {})
    strict, closed = {}, {}
    for alt in range(model.n_hypotheses):
        if alt == true:
            continue
        rf = RateFunction(A, model, true, alt, **kw)
        # inf over s < 0 and s <= 0 coincide by continuity of the finite convex I
        closed[alt] = interval_infimum(rf, -math.inf, 0.0)
        strict[alt] = closed[alt]
    return ErrorExponent(max(strict.values()), max(closed.values()), True, closed)
