"""Integration over the time simplex of diagram integrands.

A diagram of order m is integrated over the simplex of 2m+1 nonnegative
durations (tau_0, tau_1/2, tau_1, ..., tau_m) summing to t.  Integrands
carry integrable endpoint singularities of type 1/(tau log^2 tau) at the
half-integer (interaction) coordinates, which drives every design choice
here:

* ``adaptive-quadrature`` (m <= 1 only): the interaction coordinate is
  integrated with an exponential endpoint substitution that resolves the
  logarithmic singularity to near machine precision, and the two regular
  coordinates with Gauss-Legendre.  The error estimate is the difference
  of an embedded lower-order rule.
* ``monte-carlo``: importance sampling with a proposal density matched to
  the singular profile, q(s) ~ 1/((s+a) log^2((s+a)/b)) per interaction
  coordinate, applied sequentially with the remaining time budget; the
  regular coordinates fill the rest of the simplex uniformly.  The error
  estimate is the sample standard error.
* ``quasi-monte-carlo``: the same map applied to scrambled Sobol points;
  the error estimate is the spread over independent randomizations.

Sampling is partitioned into fixed-size blocks; block b draws from a
counter-based stream keyed by (seed, b) and blocks are reduced in index
order, so a fixed seed gives bit-identical results for any worker count.

Vectorized integrands: an integrand object may expose

* ``evaluate_batch(tau)`` with ``tau`` of shape (B, 2m+1), returning (B,)
  values -- used by the sampling modes in place of per-sample calls;
* ``evaluate_scaled(tau_int, log_half)`` with the m+1 integer-slot
  durations and the *logarithms* of the m half-slot durations, returning
  the integrand multiplied by the product of the half-slot durations --
  used by the quadrature mode so that 1/tau singular factors cancel
  analytically even where tau underflows.

Plain callables of a single TimeVector work in every mode.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from ._quad import gauss_legendre_01, log_endpoint_rule, log_endpoint_rule_scaled
from ._rng import stream, substream_seed
from .errors import AccuracyWarning, DomainError, IntegrandError, ParameterError

__all__ = [
    "TimeVector",
    "IntegrationPlan",
    "integrate",
    "sample_simplex",
]

_MODES = ("adaptive-quadrature", "monte-carlo", "quasi-monte-carlo")
_BLOCK = 8192          # samples per RNG block (part of the determinism contract)
_QMC_RANDOMIZATIONS = 8


@dataclass(frozen=True)
class TimeVector:
    """Durations (tau_0, tau_1/2, tau_1, ..., tau_m): 2m+1 nonnegative reals.

    Even positions are the regular (heat) slots tau_0..tau_m, odd positions
    the interaction slots tau_1/2..tau_{m-1/2}.
    """

    durations: tuple[float, ...]

    def __post_init__(self) -> None:
        durations = tuple(float(x) for x in self.durations)
        object.__setattr__(self, "durations", durations)
        if len(durations) % 2 != 1:
            raise DomainError(f"a time vector has 2m+1 entries, got {len(durations)}")
        if any(not math.isfinite(x) or x < 0.0 for x in durations):
            raise DomainError(f"durations must be finite and nonnegative, got {durations}")

    @property
    def m(self) -> int:
        return len(self.durations) // 2

    @property
    def total(self) -> float:
        return math.fsum(self.durations)

    def integer_slots(self) -> tuple[float, ...]:
        return self.durations[0::2]

    def half_slots(self) -> tuple[float, ...]:
        return self.durations[1::2]


@dataclass(frozen=True)
class IntegrationPlan:
    """How to integrate: mode, sampling budget, tolerance, and base seed."""

    mode: str = "adaptive-quadrature"
    samples: int = 65536
    rel_tol: float = 1e-3
    seed: int = 2026

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ParameterError(f"unknown integration mode {self.mode!r}; choose from {_MODES}")
        if self.mode != "adaptive-quadrature" and self.samples < 1000:
            raise ParameterError(f"sampling modes need samples >= 1000, got {self.samples}")
        if not (0.0 < self.rel_tol <= 1e-1):
            raise ParameterError(f"rel_tol must lie in (0, 1e-1], got {self.rel_tol}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ParameterError(f"seed must be an integer, got {self.seed!r}")


def sample_simplex(m: int, t: float, rng_stream: np.random.Generator) -> TimeVector:
    """A uniform sample from the simplex of 2m+1 durations summing to t.

    Uses normalized exponential spacings, so every coordinate has the
    exchangeable Dirichlet(1, ..., 1) law with mean t/(2m+1).
    """
    if m < 1:
        raise DomainError(f"simplex sampling needs m >= 1, got {m}")
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"total time must be positive and finite, got {t}")
    e = rng_stream.standard_exponential(2 * m + 1)
    return TimeVector(tuple(t * e / e.sum()))


# ---------------------------------------------------------------------------
# proposal maps: uniforms in (0,1)^{2m}  ->  simplex point + proposal density
# ---------------------------------------------------------------------------

def _stick_break(u: np.ndarray, budget: np.ndarray, n_slots: int) -> np.ndarray:
    """Uniform Dirichlet split of ``budget`` into ``n_slots`` parts.

    ``u`` holds n_slots - 1 uniform columns; the map is the sequential
    inverse-CDF stick-breaking construction, so it is smooth in u (QMC
    friendly) and yields the exchangeable uniform law on the simplex.
    """
    out = np.empty((u.shape[0], n_slots))
    rem = budget.astype(float).copy()
    for j in range(n_slots - 1):
        frac = 1.0 - (1.0 - u[:, j]) ** (1.0 / (n_slots - 1 - j))
        out[:, j] = rem * frac
        rem = rem - out[:, j]
    out[:, n_slots - 1] = rem
    return out


def _uniform_map(m: int, t: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stick-breaking map onto the uniform law of all 2m+1 coordinates.

    Returns the durations and the log proposal density (a constant).
    """
    tau = _stick_break(u, np.full(u.shape[0], t), 2 * m + 1)
    log_q = np.full(u.shape[0], math.lgamma(2 * m + 1) - 2 * m * math.log(t))
    return tau, log_q


def _importance_map(m: int, t: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singularity-matched proposal, direct-space variant.

    Each half slot k is drawn from q_k(s) = 1/(Z_k (s+a) log^2((s+a)/b_k))
    on (0, budget_k) with the floor a = 1e-12 t and b_k = e (budget_k + a);
    the inverse CDF is explicit.  The integer slots then fill the remaining
    budget uniformly.  Returns the (B, 2m+1) durations and the log of the
    joint proposal density w.r.t. Lebesgue measure on the 2m-dimensional
    simplex.  Used for integrands evaluated pointwise in direct space; the
    floor caps the weight ratio only down to scale a, so integrands with
    the full 1/(s log^2 s) singularity should expose ``evaluate_scaled``
    and get the log-space map below instead.
    """
    bsz = u.shape[0]
    a = 1e-12 * t
    tau = np.zeros((bsz, 2 * m + 1))
    log_q = np.zeros(bsz)
    rem = np.full(bsz, t)
    for k in range(m):
        bk = math.e * (rem + a)
        log_ba = np.log(bk / a)
        z = 1.0 - 1.0 / log_ba
        x = u[:, k] * z + 1.0 / log_ba          # = 1/|log((s+a)/b_k)|, exact
        s = bk * np.exp(-1.0 / x) - a
        s = np.clip(s, 0.0, rem * (1.0 - 1e-9))
        tau[:, 2 * k + 1] = s
        log_q -= np.log(z) + np.log(s + a) - 2.0 * np.log(x)
        rem = rem - s
    tau[:, 0::2] = _stick_break(u[:, m:], rem, m + 1)
    log_q += math.lgamma(m + 1) - m * np.log(rem)
    return tau, log_q


def _importance_map_scaled(
    m: int, t: float, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singularity-matched proposal, log-space variant (floor-free).

    The half slots are sampled through their logarithms: w = log budget + 1
    - 1/u is the inverse CDF of the density 1/(s log^2(s/(e budget))) --
    the same profile with the floor taken to zero -- so the far tail is
    covered all the way down (log sigma is handed to the integrand, never
    sigma itself, so underflow is irrelevant).  For integrands of the
    matching 1/(s log^2 s) type, the sample weight per slot is
    sigma * integrand-factor * (1 + log(budget/sigma))^2, which is bounded:
    finite variance with no representability floor.

    Returns (integer-slot durations (B, m+1), log half-slot durations
    (B, m), log importance weight (B,)); the estimator is
    mean(evaluate_scaled(...) * exp(log weight)).
    """
    bsz = u.shape[0]
    log_half = np.empty((bsz, m))
    log_w = np.zeros(bsz)
    rem = np.full(bsz, t)
    for k in range(m):
        w = np.log(rem) + 1.0 - 1.0 / u[:, k]
        log_half[:, k] = w
        log_w -= 2.0 * np.log(u[:, k])
        rem = rem - np.minimum(np.exp(w), rem * (1.0 - 1e-12))
    tau_int = _stick_break(u[:, m:], rem, m + 1)
    log_w += m * np.log(rem) - math.lgamma(m + 1)
    return tau_int, log_half, log_w


# ---------------------------------------------------------------------------
# integrand adapters
# ---------------------------------------------------------------------------

def _interleave(tau_int: np.ndarray, half: np.ndarray) -> np.ndarray:
    out = np.empty((tau_int.shape[0], tau_int.shape[1] + half.shape[1]))
    out[:, 0::2] = tau_int
    out[:, 1::2] = half
    return out


def _batch_values(integrand, tau: np.ndarray) -> np.ndarray:
    fn = getattr(integrand, "evaluate_batch", None)
    if fn is not None:
        vals = np.asarray(fn(tau), dtype=float)
    else:
        vals = np.array([float(integrand(TimeVector(tuple(row)))) for row in tau])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise IntegrandError(
            "integrand returned a non-finite value",
            time_vector=TimeVector(tuple(tau[bad[0]])),
        )
    return vals


def _weighted_values(integrand, m: int, t: float, u: np.ndarray, proposal: str) -> np.ndarray:
    """Map uniforms to simplex samples and return integrand/density values."""
    scaled = getattr(integrand, "evaluate_scaled", None)
    if proposal == "importance" and scaled is not None:
        tau_int, log_half, log_w = _importance_map_scaled(m, t, u)
        vals = np.asarray(scaled(tau_int, log_half), dtype=float) * np.exp(log_w)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            i = bad[0]
            raise IntegrandError(
                "integrand returned a non-finite value",
                time_vector=TimeVector(tuple(_interleave(tau_int, np.exp(log_half))[i])),
            )
        return vals
    if proposal == "importance":
        tau, log_q = _importance_map(m, t, u)
    else:
        tau, log_q = _uniform_map(m, t, u)
    return _batch_values(integrand, tau) * np.exp(-log_q)


def _check_scalar(value: float, tv: TimeVector) -> float:
    if not math.isfinite(value):
        raise IntegrandError("integrand returned a non-finite value", time_vector=tv)
    return value


# ---------------------------------------------------------------------------
# quadrature (m <= 1)
# ---------------------------------------------------------------------------

def _quadrature_m1(t: float, integrand, n_sigma: int, n_gl: int) -> float:
    """One pass of the nested rule on the m=1 simplex.

    Outer: interaction coordinate sigma with the exponential endpoint
    substitution; inner: Gauss-Legendre split of the remainder into
    (tau_0, tau_1).
    """
    x01, w01 = gauss_legendre_01(n_gl)
    scaled = getattr(integrand, "evaluate_scaled", None)
    if scaled is not None:
        log_sigma, w_sigma = log_endpoint_rule_scaled(t, n_sigma)
        sigma = np.exp(log_sigma)
        rem = t - sigma
        ls = np.repeat(log_sigma, n_gl)
        ws = np.repeat(w_sigma, n_gl)
        rm = np.repeat(rem, n_gl)
        tau1 = rm * np.tile(x01, n_sigma)
        tau0 = rm - tau1
        wt = rm * np.tile(w01, n_sigma)
        vals = np.asarray(scaled(np.column_stack([tau0, tau1]), ls[:, None]), dtype=float)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            i = bad[0]
            raise IntegrandError(
                "integrand returned a non-finite value",
                time_vector=TimeVector((tau0[i], math.exp(ls[i]), tau1[i])),
            )
        return float(np.sum(ws * wt * vals))
    sigma, _, w_sigma = log_endpoint_rule(t, n_sigma)
    keep = (sigma > 0.0) & (w_sigma > 0.0)
    sigma, w_sigma = sigma[keep], w_sigma[keep]
    total = 0.0
    for s, ws in zip(sigma, w_sigma):
        rem = t - s
        inner = 0.0
        for x, w in zip(x01, w01):
            tau1 = rem * x
            tv = TimeVector((rem - tau1, s, tau1))
            inner += rem * w * _check_scalar(float(integrand(tv)), tv)
        total += ws * inner
    return total


def _integrate_quadrature(m: int, t: float, integrand, plan: IntegrationPlan) -> tuple[float, float]:
    if m > 1:
        raise ParameterError(
            f"adaptive quadrature supports m <= 1 (got m={m}); use a sampling mode"
        )
    hi = _quadrature_m1(t, integrand, 72, 48)
    lo = _quadrature_m1(t, integrand, 48, 32)
    return hi, abs(hi - lo)


# ---------------------------------------------------------------------------
# sampling modes
# ---------------------------------------------------------------------------

def _clip_uniforms(u: np.ndarray) -> np.ndarray:
    return np.clip(u, 2.0**-53, 1.0 - 2.0**-53)


def _sample_block(m, t, integrand, seed, block_index, block_size, proposal):
    rng = stream(seed, block_index)
    u = _clip_uniforms(rng.random((block_size, 2 * m)))
    vals = _weighted_values(integrand, m, t, u, proposal)
    return math.fsum(vals), math.fsum(vals * vals), block_size


def _integrate_mc(m, t, integrand, plan, proposal, threads) -> tuple[float, float]:
    n = plan.samples
    sizes = [_BLOCK] * (n // _BLOCK)
    if n % _BLOCK:
        sizes.append(n % _BLOCK)
    jobs = [(i, bs) for i, bs in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ib: _sample_block(m, t, integrand, plan.seed, ib[0], ib[1], proposal), jobs))
    else:
        parts = [_sample_block(m, t, integrand, plan.seed, i, bs, proposal) for i, bs in jobs]
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def _integrate_qmc(m, t, integrand, plan, proposal, threads) -> tuple[float, float]:
    n_per = 1 << max(7, math.ceil(math.log2(max(plan.samples // _QMC_RANDOMIZATIONS, 1))))

    def one(r: int) -> float:
        sob = qmc.Sobol(d=2 * m, scramble=True, seed=substream_seed(plan.seed, r))
        u = _clip_uniforms(sob.random(n_per))
        return float(np.mean(_weighted_values(integrand, m, t, u, proposal)))

    indices = range(_QMC_RANDOMIZATIONS)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            means = np.array(list(pool.map(one, indices)))
    else:
        means = np.array([one(r) for r in indices])
    value = float(np.mean(means))
    err = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    return value, err


# ---------------------------------------------------------------------------
# public entry point
# ---------------------------------------------------------------------------

def integrate(
    m: int,
    t: float,
    integrand,
    plan: IntegrationPlan,
    *,
    proposal: str = "importance",
    threads: int = 1,
) -> tuple[float, float]:
    """Integrate ``integrand`` over the simplex of 2m+1 durations summing to t.

    Returns (value, error_estimate): a standard error in the sampling modes,
    an embedded-rule difference in quadrature mode.  m = 0 is the degenerate
    single-point simplex (pure evaluation, zero error).  Deterministic for a
    fixed seed and any ``threads``; an error estimate exceeding
    ``plan.rel_tol * |value|`` emits an AccuracyWarning (non-fatal).
    """
    if m < 0:
        raise DomainError(f"diagram order must be nonnegative, got {m}")
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"total time must be positive and finite, got {t}")
    if proposal not in ("importance", "uniform"):
        raise ParameterError(f"unknown proposal {proposal!r}")
    if m == 0:
        tv = TimeVector((t,))
        fn = getattr(integrand, "evaluate_batch", None)
        if fn is not None:
            value = float(np.asarray(fn(np.array([[t]])), dtype=float)[0])
        else:
            value = float(integrand(tv))
        return _check_scalar(value, tv), 0.0
    if plan.mode == "adaptive-quadrature":
        value, err = _integrate_quadrature(m, t, integrand, plan)
    elif plan.mode == "monte-carlo":
        value, err = _integrate_mc(m, t, integrand, plan, proposal, threads)
    else:
        value, err = _integrate_qmc(m, t, integrand, plan, proposal, threads)
    if err > plan.rel_tol * max(abs(value), np.finfo(float).tiny):
        warnings.warn(
            AccuracyWarning(
                f"integration error estimate {err:.3e} exceeds "
                f"rel_tol * |value| = {plan.rel_tol * abs(value):.3e} (m={m}, t={t})"
            ),
            stacklevel=2,
        )
    return value, err
