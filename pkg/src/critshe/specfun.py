"""Special functions for the critical-coupling moment calculus.

This module evaluates the analytic ingredients shared by the moment engine
and its verification suite:

* the interaction weight attached to each double line of a diagram,

      j(t, b) = int_0^inf t^(a-1) e^(b a) / Gamma(a) da,      t > 0,

  together with its Laplace transform, which evaluates in closed form to
  1 / (log(-z) - b) whenever Re z < -e^b;
* the modified Bessel function K0 and the planar resolvent kernel
  (1/pi) K0(sqrt(-2 z) |x|) with principal branches;
* the rising-factorial polynomials p_m(a) = a (a+1) ... (a+m) (with
  p_{-1} := 1) and the exact integral identity they satisfy;
* the convolution identity
  j(t) = int_0^s int_s^t j(t1) (t2 - t1)^(-1) j(t - t2) dt2 dt1, 0 < s < t,
  checked by singularity-adapted quadrature.

Everything involving j is routed through the single-variable reduction

      t * j(t, b) = JW(log t + b),   JW(w) := int_0^inf e^(a w) / Gamma(a) da,

which makes the quadrature nodes independent of t and keeps evaluation
stable when t underflows: only log t enters, so callers integrating against
j near t = 0 should use :func:`jfn_times_t` with the log-time argument.

JW is computed by a two-panel Gauss-Legendre scheme (split at a = 1, using
1/Gamma(a) = a / Gamma(1+a) on the first panel and log-space truncation 45
nats below the peak on the second), calibrated to ~5e-15 relative accuracy
against 40-digit reference values for w in [-3000, 6.5].  Beyond w ~ 6.5
the value overflows double precision (JW grows like exp(e^w)); the log-space
variant used for Laplace tails has no such ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from ._quad import gauss_legendre_01
from .errors import AccuracyError, BranchCutError, DomainError, SingularityError

__all__ = [
    "BetaStar",
    "JfnEvalConfig",
    "GammaPolynomial",
    "jfn",
    "jfn_times_t",
    "jfn_laplace_residual",
    "bessel_k0",
    "green2d",
    "gamma_identity_check",
    "conv_identity_residual",
]

# Euler-Mascheroni constant, 16 significant digits (also exposed publicly by
# the mollifier module, which owns the coupling-constant bookkeeping).
_EULER_GAMMA = 0.5772156649015329
_PSI_ONE = -_EULER_GAMMA  # digamma(1)

# JW(w) ~ exp(e^w); e^6.5 = 665 keeps the value below the double-precision
# overflow threshold exp(709.8) with margin.
_W_MAX = 6.5

# Number of nats below the running maximum at which integrands are truncated;
# e^-45 = 2.9e-20 is below double-precision resolution of the total.
_NAT_DROP = 45.0


@dataclass(frozen=True)
class BetaStar:
    """The effective coupling constant; any finite real value is admissible."""

    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise DomainError(f"coupling constant must be finite, got {self.value}")


def _beta_value(beta_star) -> float:
    """Accept either a BetaStar or a bare finite real."""
    b = float(getattr(beta_star, "value", beta_star))
    if not math.isfinite(b):
        raise DomainError(f"coupling constant must be finite, got {b}")
    return b


@dataclass(frozen=True)
class JfnEvalConfig:
    """Evaluation controls for the interaction weight j(t, b).

    alpha_cutoff caps the automatically determined truncation of the
    a-integral, split_point separates the small-a panel (where the
    1/Gamma(a) = a/Gamma(1+a) substitution is applied) from the log-space
    panel, and rel_tol is the relative accuracy demanded of the embedded
    coarse/fine rule pair.
    """

    alpha_cutoff: float = 1.0e6
    rel_tol: float = 1.0e-10
    split_point: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha_cutoff > self.split_point > 0.0):
            raise DomainError(
                "require alpha_cutoff > split_point > 0, got "
                f"alpha_cutoff={self.alpha_cutoff}, split_point={self.split_point}"
            )
        if not (0.0 < self.rel_tol <= 1.0e-3):
            raise DomainError(f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}")


_DEFAULT_CFG = JfnEvalConfig()


# ---------------------------------------------------------------------------
# Core reduction JW(w) = int_0^inf e^(a w) / Gamma(a) da
# ---------------------------------------------------------------------------

def _panel_a(w: np.ndarray, ns: int, sp: float) -> np.ndarray:
    """Integral over a in (0, sp) of e^(a w) a / Gamma(1 + a)."""
    xs, ws = gauss_legendre_01(ns)
    out = np.zeros_like(w)
    near = w >= -2.0
    if near.any():
        a = sp * xs[None, :]
        out[near] = sp * np.sum(
            ws * np.exp(a * w[near, None]) * a / np.exp(gammaln(1.0 + a)), axis=1
        )
    far = ~near
    if far.any():
        # substitute s = a |w| so the e^(-s) decay is resolved uniformly
        smax = np.minimum(sp * (-w[far]), _NAT_DROP)[:, None]
        s = xs[None, :] * smax
        a = s / (-w[far, None])
        out[far] = (
            np.sum(ws * smax * np.exp(-s) * a / np.exp(gammaln(1.0 + a)), axis=1)
            / (-w[far])
        )
    return out


def _peak_location(w: np.ndarray) -> np.ndarray:
    """Solve psi(a) = w for the maximizer of a w - lgamma(a) (a >= 1)."""
    astar = np.ones_like(w)
    big = w > _PSI_ONE
    if big.any():
        x = np.maximum(np.exp(w[big]), 1.5)
        for _ in range(80):
            step = (digamma(x) - w[big]) / polygamma(1, x)
            x -= step
            if np.all(np.abs(step) <= 1.0e-12 * np.abs(x)):
                break
        astar[big] = np.maximum(x, 1.0)
    return astar


def _panel_b_cut(w: np.ndarray, astar: np.ndarray, sp: float, cap: float) -> np.ndarray:
    """Upper truncation where a w - lgamma(a) has dropped _NAT_DROP nats."""
    peak = np.maximum(astar, sp)
    fmax = peak * w - gammaln(peak)
    hi = peak + 1.0
    for _ in range(40):
        growing = hi * w - gammaln(hi) > fmax - _NAT_DROP
        if not growing.any():
            break
        hi[growing] *= 1.6
    lo = peak.copy()
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        keep = mid * w - gammaln(mid) > fmax - _NAT_DROP
        lo[keep] = mid[keep]
        hi[~keep] = mid[~keep]
    return np.minimum(hi, cap)


def _panel_b(w: np.ndarray, ns: int, nb: int, sp: float, cap: float) -> np.ndarray:
    """Integral over a in (sp, acut) of e^(a w - lgamma(a))."""
    out = np.zeros_like(w)
    active = w > -48.0  # beyond this the panel is < e^-45 of the total
    if not active.any():
        return out
    wv = w[active]
    astar = _peak_location(wv)
    acut = _panel_b_cut(wv, astar, sp, cap)
    xs, ws = gauss_legendre_01(ns)
    xb, wb = gauss_legendre_01(nb)
    pb = np.zeros_like(wv)
    flat = astar <= max(3.0, sp)
    if flat.any():
        width = acut[flat] - sp
        a = sp + width[:, None] * xb[None, :]
        pb[flat] = width * np.sum(wb * np.exp(a * wv[flat, None] - gammaln(a)), axis=1)
    peaked = ~flat
    if peaked.any():
        # resolve the Gaussian-width-sqrt(astar) peak with its own panel
        wp = wv[peaked]
        ap = astar[peaked]
        cp = acut[peaked]
        sd = np.sqrt(ap)
        lo1 = np.maximum(sp, ap - 10.0 * sd)
        hi1 = np.minimum(cp, ap + 10.0 * sd)
        spv = np.full_like(wp, sp)
        acc = np.zeros_like(wp)
        for a0, a1, xn, wn in ((spv, lo1, xs, ws), (lo1, hi1, xb, wb), (hi1, cp, xs, ws)):
            width = np.maximum(a1 - a0, 0.0)
            a = a0[:, None] + width[:, None] * xn[None, :]
            acc += width * np.sum(wn * np.exp(a * wp[:, None] - gammaln(a)), axis=1)
        pb[peaked] = acc
    out[active] = pb
    return out


def _jw(w, ns: int = 48, nb: int = 96, cfg: JfnEvalConfig = _DEFAULT_CFG) -> np.ndarray:
    """JW(w) = int_0^inf e^(a w) / Gamma(a) da, vectorized over w <= _W_MAX."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w > _W_MAX):
        raise AccuracyError(
            f"interaction weight overflows double precision for log t + b > {_W_MAX}",
            estimate=math.inf,
            error_bound=math.inf,
        )
    shape = w.shape
    w = w.ravel()
    out = _panel_a(w, ns, cfg.split_point) + _panel_b(
        w, ns, nb, cfg.split_point, cfg.alpha_cutoff
    )
    return out.reshape(shape)


def _jw_log(w, cfg: JfnEvalConfig = _DEFAULT_CFG) -> np.ndarray:
    """log JW(w), stable for arbitrarily large w (used for Laplace tails).

    Both panels are accumulated in log space, so the exp(e^w) growth of JW
    never materializes as a floating-point value.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    shape = w.shape
    w = w.ravel()
    sp = cfg.split_point
    # panel A in log-sum-exp form (its far-field variant is only needed for
    # very negative w, where the plain value cannot overflow)
    la = np.empty_like(w)
    near = w >= -2.0
    if near.any():
        xs, ws = gauss_legendre_01(48)
        a = sp * xs[None, :]
        g = a * w[near, None] + np.log(a) - gammaln(1.0 + a)
        gmax = g.max(axis=1, keepdims=True)
        la[near] = np.log(sp) + gmax[:, 0] + np.log(np.sum(ws * np.exp(g - gmax), axis=1))
    far = ~near
    if far.any():
        pa = _panel_a(w[far], 48, sp)
        la[far] = np.where(pa > 0.0, np.log(np.maximum(pa, 1.0e-300)), -np.inf)
    # panel B in log-sum-exp form
    lb = np.full_like(w, -np.inf)
    active = w > -48.0
    if active.any():
        wv = w[active]
        astar = _peak_location(wv)
        acut = _panel_b_cut(wv, astar, sp, cfg.alpha_cutoff)
        xb, wb = gauss_legendre_01(96)
        xs, ws = gauss_legendre_01(48)
        peak = np.maximum(astar, sp)
        fmax = peak * wv - gammaln(peak)
        sd = np.sqrt(np.maximum(astar, 1.0))
        lo1 = np.clip(astar - 10.0 * sd, sp, acut)
        hi1 = np.clip(astar + 10.0 * sd, sp, acut)
        spv = np.full_like(wv, sp)
        acc = np.zeros_like(wv)
        for a0, a1, xn, wn in ((spv, lo1, xs, ws), (lo1, hi1, xb, wb), (hi1, acut, xs, ws)):
            width = np.maximum(a1 - a0, 0.0)
            a = a0[:, None] + width[:, None] * xn[None, :]
            acc += width * np.sum(
                wn * np.exp(a * wv[:, None] - gammaln(a) - fmax[:, None]), axis=1
            )
        lb[active] = fmax + np.log(np.maximum(acc, 1.0e-300))
    return np.logaddexp(la, lb).reshape(shape)


# ---------------------------------------------------------------------------
# Public interaction-weight API
# ---------------------------------------------------------------------------

def jfn(t, beta_star, cfg: JfnEvalConfig | None = None):
    """The interaction weight j(t, b) = int_0^inf t^(a-1) e^(b a)/Gamma(a) da.

    Accepts a scalar or array of times t > 0.  The integral is evaluated by
    the calibrated two-panel scheme at two resolutions; if the embedded pair
    disagrees beyond cfg.rel_tol an AccuracyError carrying the fine estimate
    and the observed bound is raised.
    """
    cfg = cfg or _DEFAULT_CFG
    b = _beta_value(beta_star)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr <= 0.0):
        raise DomainError(f"time must be positive and finite, got {t!r}")
    w = np.log(t_arr) + b
    coarse = _jw(w, 48, 96, cfg)
    fine = _jw(w, 72, 144, cfg)
    err = np.abs(fine - coarse) / np.maximum(np.abs(fine), 1.0e-300)
    if np.any(err > cfg.rel_tol):
        raise AccuracyError(
            "interaction-weight quadrature did not converge to requested rel_tol",
            estimate=fine / t_arr,
            error_bound=float(err.max()),
        )
    out = fine / t_arr
    return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out


def jfn_times_t(log_t, beta_star, cfg: JfnEvalConfig | None = None):
    """t * j(t, b) evaluated from log t (vectorized fast path).

    This is the form every time-simplex integrand should use: near the
    simplex boundary t underflows double precision while log t stays finite,
    and the product t * j(t, b) = JW(log t + b) remains O(1).  The caller is
    expected to fold the 1/t jacobian into its substitution analytically.
    """
    cfg = cfg or _DEFAULT_CFG
    b = _beta_value(beta_star)
    w = np.asarray(log_t, dtype=float) + b
    out = _jw(w, cfg=cfg)
    return float(out[0]) if np.ndim(log_t) == 0 else out


def jfn_laplace_residual(z, beta_star, cfg: JfnEvalConfig | None = None) -> float:
    """|int_0^inf e^(z t) j(t, b) dt  -  1/(log(-z) - b)| for Re z < -e^b.

    The transform is computed by a hybrid rule: on (0, delta) the exponential
    is expanded so each term reduces to a t-free a-integral (handling the
    1/(t log^2 t) endpoint analytically), and on (delta, T) a composite
    Gauss-Legendre rule in y = log t is used, with T grown until the
    integrand has decayed 50 nats below unity.
    """
    cfg = cfg or _DEFAULT_CFG
    b = _beta_value(beta_star)
    z = complex(z)
    if not (z.real < -math.exp(b)):
        raise DomainError(
            f"Laplace transform requires Re z < -e^b; got Re z = {z.real}, "
            f"-e^b = {-math.exp(b)}"
        )
    target = 1.0 / (np.log(-z) - b)

    # --- small-t piece: sum_k (z delta)^k / k! * A_k with
    #     A_k = int_0^inf delta^a e^(b a) / ((a + k) Gamma(a)) da
    delta = min(0.25 / abs(z), 0.25 * math.exp(-b), 0.05)
    w = math.log(delta) + b  # < log(0.25) < psi(1), so the a>1 panel decays
    kmax = 60
    ks = np.arange(kmax)
    xs, ws = gauss_legendre_01(64)
    if w >= -2.0:
        a = xs
        base = ws * np.exp(a * w) * a / np.exp(gammaln(1.0 + a))
    else:
        smax = min(-w, _NAT_DROP)
        s = xs * smax
        a = s / (-w)
        base = ws * smax * np.exp(-s) * a / np.exp(gammaln(1.0 + a)) / (-w)
    A = np.sum(base[None, :] / (a[None, :] + ks[:, None]), axis=1)
    if w > -48.0:
        fmax = w  # integrand of the a>1 panel is decreasing from a = 1
        hi = 2.0
        while hi * w - gammaln(hi) > fmax - _NAT_DROP:
            hi *= 1.6
        lo = 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid * w - gammaln(mid) > fmax - _NAT_DROP:
                lo = mid
            else:
                hi = mid
        xb, wb = gauss_legendre_01(128)
        a2 = 1.0 + xb * (hi - 1.0)
        base2 = wb * (hi - 1.0) * np.exp(a2 * w - gammaln(a2))
        A = A + np.sum(base2[None, :] / (a2[None, :] + ks[:, None]), axis=1)
    zd = z * delta  # |zd| <= 0.25 so the series converges rapidly
    terms = np.cumprod(np.concatenate([[1.0 + 0.0j], zd / np.arange(1.0, kmax)]))
    small = np.sum(terms * A)

    # --- mid + tail piece on (delta, T) in y = log t
    T = max(1.0, 4.0 * delta)
    while True:
        decay = z.real * T + float(_jw_log(math.log(T) + b, cfg)[0]) - math.log(T)
        if decay < -50.0:
            break
        T *= 1.5
        if T > 1.0e9:
            raise AccuracyError(
                "Laplace tail did not decay within the truncation budget "
                "(z too close to the convergence boundary)",
                estimate=float("nan"),
                error_bound=math.inf,
            )
    ys, yw = gauss_legendre_01(44)
    npan = 16
    edges = np.linspace(math.log(delta), math.log(T), npan + 1)
    mid_tail = 0.0 + 0.0j
    for left, right in zip(edges[:-1], edges[1:]):
        y = left + ys * (right - left)
        t_nodes = np.exp(y)
        log_jw = _jw_log(y + b, cfg)
        mid_tail += (right - left) * np.sum(yw * np.exp(z * t_nodes + log_jw))
    return float(abs(small + mid_tail - target))


def conv_identity_residual(s: float, t: float, beta_star) -> float:
    """|j(t) - int_0^s int_s^t j(t1) (t2-t1)^(-1) j(t-t2) dt2 dt1|, 0 < s < t.

    Both inner times are mapped by the logarithmic-endpoint substitution
    t1 = s e^(1 - 1/l1), t - t2 = (t-s) e^(1 - 1/l2); the integrable corner
    of 1/(t2 - t1) at l1 = l2 = 1 is then resolved by splitting the unit
    square in (a, b) = (1-l1, 1-l2) into its two Duffy triangles, whose
    radial jacobian cancels the 1/(t2 - t1) growth exactly.  The interaction
    weights are evaluated from log t1 and log(t - t2) directly, so the
    double-exponential underflow of t1 near l1 = 0 is harmless.
    """
    b = _beta_value(beta_star)
    s = float(s)
    t = float(t)
    if not (0.0 < s < t) or not (math.isfinite(s) and math.isfinite(t)):
        raise DomainError(f"require 0 < s < t, got s={s}, t={t}")
    n_rad, n_ang = 64, 64
    xa, wa = gauss_legendre_01(n_rad)
    xw, ww = gauss_legendre_01(n_ang)

    def duffy_integrand(a: np.ndarray, c: np.ndarray) -> np.ndarray:
        l1 = 1.0 - a
        l2 = 1.0 - c
        log_t1 = math.log(s) + 1.0 - 1.0 / l1
        log_tt2 = math.log(t - s) + 1.0 - 1.0 / l2
        t1 = np.exp(log_t1)  # may underflow; only used inside the difference
        tt2 = np.exp(log_tt2)  # = t - t2
        gap = (t - tt2) - t1  # = t2 - t1 > 0 on the open square
        return (
            _jw(log_t1 + b) / l1**2 * _jw(log_tt2 + b) / l2**2 / gap
        )

    A = np.repeat(xa, n_ang)
    WA = np.repeat(wa, n_ang)
    C = np.tile(xw, n_rad)
    WC = np.tile(ww, n_rad)
    rhs = np.sum(WA * WC * A * duffy_integrand(A, A * C))
    rhs += np.sum(WA * WC * A * duffy_integrand(A * C, A))
    lhs = float(_jw(math.log(t) + b)[0]) / t
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Modified Bessel function K0 and the planar resolvent kernel
# ---------------------------------------------------------------------------

def _k0_ascending(x: np.ndarray) -> np.ndarray:
    """Ascending series; machine precision for x < 2 (cancellation ~ e^(2x) eps)."""
    q = 0.25 * x * x
    i0 = np.ones_like(x)
    term = np.ones_like(x)
    s = np.zeros_like(x)
    h = 0.0
    for k in range(1, 64):
        term = term * q / (k * k)
        i0 += term
        h += 1.0 / k
        s += term * h
        if np.all(term * max(h, 1.0) < 1.0e-19 * np.maximum(i0, np.abs(s) + 1.0e-30)):
            break
    return -(np.log(0.5 * x) + _EULER_GAMMA) * i0 + s


def _k0_integral(x: np.ndarray) -> np.ndarray:
    """Trapezoid rule on K0(x) = int_0^inf e^(-x cosh u) du.

    The integrand is even with double-exponential decay, so the trapezoid
    rule converges geometrically; h resolves the O(1/sqrt(x)) width of the
    u = 0 peak and the grid extends to where x cosh u > 760.
    """
    h = min(0.08, 0.35 / math.sqrt(float(x.max())))
    umax = float(np.arccosh(max(760.0 / float(x.min()), 2.0)))
    n = int(math.ceil(umax / h)) + 1
    u = np.arange(n) * h
    f = np.exp(-np.outer(x, np.cosh(u)))
    return h * (f.sum(axis=1) - 0.5 * f[:, 0])


def _k0_asymptotic(x: float, min_terms: int = 12) -> tuple[float, float]:
    """Alternating large-x expansion, truncated at its smallest term.

    Returns (value, magnitude of the last retained term); the latter bounds
    the truncation error of the divergent series.  Useful as an independent
    cross-check for x >~ 12 where the smallest term is below 1e-10.
    """
    s = 1.0
    term = 1.0
    prev = math.inf
    k = 0
    while True:
        k += 1
        term *= -((2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) > prev and k > min_terms:
            break
        s += term
        prev = abs(term)
        if abs(term) < 1.0e-19 * abs(s) or k > 60:
            break
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * s, prev


def bessel_k0(x):
    """K0(x) for x > 0, scalar or array, to ~1e-13 relative accuracy.

    Ascending series for x < 2; for x >= 2 the cosh-integral representation
    (the series loses digits to cancellation, and the asymptotic expansion
    bottoms out near 1e-8 at moderate x, so neither covers the middle range
    at the accuracy required here).
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(x_arr)) or np.any(x_arr <= 0.0):
        raise DomainError(f"K0 requires x > 0, got {x!r}")
    out = np.empty_like(x_arr)
    small = x_arr < 2.0
    if small.any():
        out[small] = _k0_ascending(x_arr[small])
    if (~small).any():
        out[~small] = _k0_integral(x_arr[~small])
    return float(out[0]) if np.ndim(x) == 0 else out


def _k0_complex(zeta: complex) -> complex:
    """K0 on the right half-plane Re zeta > 0 (principal branch).

    Ascending series for |zeta| <= 10 (loses ~e^(2|zeta|) eps to
    cancellation, i.e. >= 7 significant digits retained), asymptotic series
    beyond.  Accuracy ~1e-7 in the worst case; the real axis takes the
    machine-precision real path in green2d instead.
    """
    if abs(zeta) <= 10.0:
        q = 0.25 * zeta * zeta
        i0 = 1.0 + 0.0j
        term = 1.0 + 0.0j
        s = 0.0 + 0.0j
        h = 0.0
        for k in range(1, 80):
            term = term * q / (k * k)
            i0 += term
            h += 1.0 / k
            s += term * h
            if abs(term) * max(h, 1.0) < 1.0e-19 * max(abs(i0), abs(s) + 1.0e-30):
                break
        return -(np.log(0.5 * zeta) + _EULER_GAMMA) * i0 + s
    s = 1.0 + 0.0j
    term = 1.0 + 0.0j
    prev = math.inf
    k = 0
    while True:
        k += 1
        term *= -((2 * k - 1) ** 2) / (k * 8.0 * zeta)
        if abs(term) > prev and k > 12:
            break
        s += term
        prev = abs(term)
        if abs(term) < 1.0e-19 * abs(s) or k > 60:
            break
    return np.sqrt(np.pi / (2.0 * zeta)) * np.exp(-zeta) * s


def green2d(z, x) -> complex:
    """The planar resolvent kernel (1/pi) K0(sqrt(-2 z) |x|).

    Principal branches for the square root and logarithm, with cut on
    (-inf, 0]; hence z must avoid [0, inf) and the kernel is real positive
    for real z < 0.
    """
    x_arr = np.asarray(x, dtype=float).reshape(-1)
    r = float(np.hypot(x_arr[0], x_arr[1])) if x_arr.size == 2 else float(abs(x_arr[0]))
    if r == 0.0:
        raise SingularityError("resolvent kernel diverges at coincident points (x = 0)")
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise BranchCutError(
            f"resolvent kernel requires z off the branch cut [0, inf); got {z}"
        )
    zeta = complex(np.sqrt(-2.0 * z)) * r  # Re zeta > 0 off the cut
    if zeta.imag == 0.0:
        return complex(bessel_k0(zeta.real) / math.pi)
    return _k0_complex(zeta) / math.pi


# ---------------------------------------------------------------------------
# Rising-factorial polynomials and the exact integral identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaPolynomial:
    """p_m(a) = a (a+1) ... (a+m) with exact rational coefficients.

    The coefficients are stored in the monomial basis in ascending degree;
    the degenerate index m = -1 denotes the constant polynomial 1.
    """

    m: int
    coefficients: tuple[Fraction, ...]

    @classmethod
    def build(cls, m: int) -> "GammaPolynomial":
        if m < -1:
            raise DomainError(f"rising-factorial index must be >= -1, got {m}")
        coeffs = [Fraction(1)]
        for r in range(m + 1):
            # multiply by (a + r)
            shifted = [Fraction(0)] + coeffs
            coeffs = [shifted[i] + r * (coeffs[i] if i < len(coeffs) else 0)
                      for i in range(len(shifted))]
        return cls(m, tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, a: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coefficients):
            acc = acc * a + c
        return acc


def gamma_identity_check(m: int, alpha: float) -> float:
    """Exact check of p_m(a) = int_0^a sum_k C(m+1, m-k+1) (m-k)! p_{k-1} da1.

    Both sides are evaluated in exact rational arithmetic (the float alpha is
    converted to its exact binary rational), so the returned absolute
    difference is zero up to the final rational-to-float rounding.
    """
    if m < 0:
        raise DomainError(f"identity index must be nonnegative, got {m}")
    a = Fraction(float(alpha))
    lhs = GammaPolynomial.build(m).evaluate(a)
    integrand = [Fraction(0)] * (m + 1)  # degree <= m
    for k in range(m + 1):
        c = Fraction(math.comb(m + 1, m - k + 1) * math.factorial(m - k))
        for i, ci in enumerate(GammaPolynomial.build(k - 1).coefficients):
            integrand[i] += c * ci
    rhs = sum((ci * a ** (i + 1)) / (i + 1) for i, ci in enumerate(integrand))
    return abs(float(lhs - rhs))
