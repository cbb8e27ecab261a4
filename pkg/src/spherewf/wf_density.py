"""Exact Wright-Fisher transition densities on the simplex.

Three evaluators, all returning densities with respect to Lebesgue
measure dx_1...dx_{k-1} on the simplex:

* `dirichlet_stationary` - the stationary density
  Gamma(mu) * prod_i x_i^{eps_i - 1} / Gamma(eps_i),  mu = sum(eps).

* `griffiths_density` - the orthogonal-polynomial expansion for common
  mutation parameter eps:

      p(x,t|x') = [Gamma(mu) prod x_i^{eps-1} / Gamma(eps)^k]
                  * sum_n exp(-n(n-1)t/2 - mu*n*t/2) Q_n(x, x')

  with Q_0 = 1 and, for n >= 1,

      Q_n = (mu+2n-1)/n! * sum_{m<=n} (-1)^{n-m} C(n,m) (mu+m)_{(n-1)} xi_m,
      xi_m = mu_{(m)} Gamma(eps)^k * sum_{|l|=m} m!/prod(l_j!)
             * prod_j (x_j x'_j)^{l_j} / Gamma(l_j + eps),

  where a_{(m)} is the rising factorial.

* `pushforward_density` - the sphere heat kernel pushed through
  x_i = y_i^2, summing over the 2^k sign preimages of y (y' is fixed to
  the positive root; the Jacobian bookkeeping yields the 2^{-k} factor):

      p(x,t|x') = Gamma(k/2)/pi^{k/2} * prod x_i^{-1/2} * 2^{-k}
                  * sum_{s in {-1,1}^k} rho_series((s*y).y', t, D)

  Odd-degree series terms cancel across the sign sum; the evaluator
  tracks the even/odd aggregates so that cancellation is observable.

Numerical note: the alternating m-sum defining Q_n loses precision once
n is moderately large (small t).  Each Q_n carries a cancellation flag,
and `griffiths_density` automatically switches to a resummed evaluation
by powers of the (all-positive) xi_m,

      sum_n e_n(t) Q_n = sum_m xi_m * W_m(t),

whose x-independent weights W_m(t) are computed once per (t, k, eps) in
arbitrary-precision arithmetic and cached.  The m-ordered sum has no
destructive cancellation, so float64 xi_m values suffice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import mpmath
import numpy as np

from .specfun import log_gamma
from .sphere_heat import T_MIN, circle_series, zonal_series
from .types import SimplexPoint, Truncation

__all__ = [
    "GRIFFITHS_T_MIN",
    "WF_TRUNCATION",
    "ENUMERATION_BUDGET",
    "GriffithsQuery",
    "PushforwardQuery",
    "DensityValue",
    "dirichlet_stationary",
    "compositions",
    "xi_m",
    "q_n",
    "griffiths_density",
    "pushforward_density",
    "pushforward_series_batch",
]

#: Floor for the expansion time argument; convergence below it is not
#: addressed by the series truncation rule.
GRIFFITHS_T_MIN = 0.01

#: Default truncation for the simplex expansions.
WF_TRUNCATION = Truncation(max_terms=200, tol=1e-10, consecutive_small=3)

#: xi_m refuses composition enumerations larger than this.
ENUMERATION_BUDGET = 10_000_000

#: Sign-preimage enumeration guard for the pushforward (2^k terms).
_MAX_SIGN_K = 20


@dataclass(frozen=True)
class GriffithsQuery:
    """Expansion query with common mutation parameter epsilon > 0."""

    x: SimplexPoint
    x_prime: SimplexPoint
    t: float
    epsilon: float
    trunc: Truncation = WF_TRUNCATION

    def __post_init__(self):
        if self.x.k != self.x_prime.k:
            raise ValueError("GriffithsQuery: dimension mismatch")
        if not (self.epsilon > 0.0):
            raise ValueError("GriffithsQuery: epsilon must be > 0")
        if self.t < GRIFFITHS_T_MIN:
            raise ValueError(f"GriffithsQuery: t below supported floor {GRIFFITHS_T_MIN}")
        if not (self.x.is_interior() and self.x_prime.is_interior()):
            raise ValueError("GriffithsQuery: expansion requires interior points (all x_j > 0)")


@dataclass(frozen=True)
class PushforwardQuery:
    """Sphere-kernel pushforward query; D = 1/8 matches the c = 1 diffusion."""

    x: SimplexPoint
    x_prime: SimplexPoint
    t: float
    D: float = 0.125
    trunc: Truncation = WF_TRUNCATION

    def __post_init__(self):
        if self.x.k != self.x_prime.k:
            raise ValueError("PushforwardQuery: dimension mismatch")
        if not (self.D > 0.0):
            raise ValueError("PushforwardQuery: D must be > 0")
        if self.t < T_MIN:
            raise ValueError(f"PushforwardQuery: t below supported floor {T_MIN}")
        if self.x.k > _MAX_SIGN_K:
            raise ValueError(f"PushforwardQuery: k > {_MAX_SIGN_K} not supported (2^k sign sum)")
        if not (self.x.is_interior() and self.x_prime.is_interior()):
            raise ValueError("PushforwardQuery: prefactor diverges at boundary points")


@dataclass(frozen=True)
class DensityValue:
    """Density evaluation with diagnostics.

    value = prefactor * series_sum.  even_part/odd_part are the
    parity-split series aggregates for the pushforward (None for the
    Griffiths expansion).  cancellation reports that at least one Q_n
    lost more than ten digits to cancellation; mode records whether the
    direct float scan or the resummed high-precision path produced
    series_sum.  tail_bound is the heuristic size of the last few terms.
    """

    value: float
    prefactor: float
    series_sum: float
    terms_used: int
    tail_bound: float
    converged: bool
    even_part: Optional[float] = None
    odd_part: Optional[float] = None
    cancellation: bool = False
    mode: str = "direct"

    def __float__(self) -> float:
        return self.value


def _log_dirichlet(coords: np.ndarray, eps: np.ndarray) -> float:
    mu = float(eps.sum())
    return float(
        log_gamma(mu)
        - sum(log_gamma(e) for e in eps)
        + float(((eps - 1.0) * np.log(coords)).sum())
    )


def dirichlet_stationary(x: SimplexPoint, epsilon) -> float:
    """Stationary density Gamma(mu) prod x_i^{eps_i-1}/Gamma(eps_i), log-domain.

    Boundary points: returns math.inf when some x_i = 0 has eps_i < 1
    (the density diverges there), 0.0 when all boundary coordinates have
    eps_i > 1, and treats eps_i = 1 factors as constant.
    """
    eps = np.asarray(epsilon, dtype=float)
    if eps.ndim == 0:
        eps = np.full(x.k, float(eps))
    if eps.shape != (x.k,):
        raise ValueError("dirichlet_stationary: epsilon must be scalar or length k")
    if eps.min() <= 0.0:
        raise ValueError("dirichlet_stationary: all epsilon_i must be > 0")
    c = x.coords
    zero = c == 0.0
    if np.any(zero):
        if np.any(eps[zero] < 1.0):
            return math.inf
        if np.any(eps[zero] > 1.0):
            return 0.0
        keep = ~zero
        return math.exp(
            log_gamma(float(eps.sum()))
            - sum(log_gamma(e) for e in eps)
            + float(((eps[keep] - 1.0) * np.log(c[keep])).sum())
        )
    return math.exp(_log_dirichlet(c, eps))


@lru_cache(maxsize=None)
def _compositions_cached(m: int, k: int) -> np.ndarray:
    # iterative odometer over weak compositions of m into k parts; the
    # index of the first nonzero part is tracked so each step is O(k)
    arr = np.empty((math.comb(m + k - 1, k - 1), k), dtype=np.int64)
    comp = [m] + [0] * (k - 1)
    arr[0] = comp
    first = 0
    row = 1
    while comp[-1] != m:
        v = comp[first]
        comp[first] = 0
        comp[0] = v - 1
        comp[first + 1] += 1
        first = 0 if v > 1 else first + 1
        arr[row] = comp
        row += 1
    arr.flags.writeable = False
    return arr


def compositions(m: int, k: int) -> np.ndarray:
    """All weak compositions (l_1, ..., l_k) of m, as a C(m+k-1, k-1) x k array."""
    if m < 0 or k < 1:
        raise ValueError("compositions: need m >= 0 and k >= 1")
    return _compositions_cached(m, k)


@lru_cache(maxsize=None)
def _xi_log_const(m: int, k: int, eps: float):
    """Per-composition x-independent log factors for xi_m, plus the composition matrix."""
    comp = _compositions_cached(m, k)
    lf = np.array([log_gamma(j + 1.0) for j in range(m + 1)])
    lg_eps = np.array([log_gamma(j + eps) for j in range(m + 1)])
    const = lf[m] - lf[comp].sum(axis=1) - lg_eps[comp].sum(axis=1) + k * log_gamma(eps)
    const.flags.writeable = False
    return comp.astype(np.float64), const


def _sum_positive(a: np.ndarray) -> float:
    """Compensated sum of nonnegative terms: exact fsum across block sums."""
    if a.size <= 512:
        return math.fsum(a.tolist())
    blocks = np.add.reduceat(a, np.arange(0, a.size, 512))
    return math.fsum(blocks.tolist())


def _log_xi(m: int, log_xx: np.ndarray, k: int, eps: float) -> float:
    """log xi_m given log(x_j * x'_j); all composition terms are positive."""
    mu = k * eps
    comp, const = _xi_log_const(m, k, eps)
    logs = const + comp @ log_xx
    mx = float(logs.max())
    s = _sum_positive(np.exp(logs - mx))
    return log_gamma(mu + m) - log_gamma(mu) + mx + math.log(s)


def xi_m(m: int, x: SimplexPoint, x_prime: SimplexPoint, epsilon: float,
         budget: int = ENUMERATION_BUDGET) -> float:
    """xi_m of the expansion; enumerates all C(m+k-1, k-1) compositions."""
    if m < 0:
        raise ValueError("xi_m: m must be >= 0")
    if not (epsilon > 0.0):
        raise ValueError("xi_m: epsilon must be > 0")
    if x.k != x_prime.k:
        raise ValueError("xi_m: dimension mismatch")
    k = x.k
    if math.comb(m + k - 1, k - 1) > budget:
        raise ValueError(f"xi_m: composition count C({m + k - 1},{k - 1}) exceeds budget {budget}")
    xx = x.coords * x_prime.coords
    if xx.min() <= 0.0:
        raise ValueError("xi_m: requires interior points")
    return math.exp(_log_xi(m, np.log(xx), k, float(epsilon)))


def _q_n_terms(n: int, mu: float, log_xi_at: Callable[[int], float]) -> tuple[float, float]:
    """(Q_n, largest partial term magnitude) for n >= 1 via the alternating m-sum."""
    logs = np.empty(n + 1)
    signs = np.empty(n + 1)
    for m in range(n + 1):
        logs[m] = (
            math.log(math.comb(n, m))
            + log_gamma(mu + m + n - 1.0)
            - log_gamma(mu + m)
            + log_xi_at(m)
            - log_gamma(n + 1.0)
        )
        signs[m] = -1.0 if (n - m) % 2 else 1.0
    mx = float(logs.max())
    s = math.fsum(signs * np.exp(logs - mx))
    scale = (mu + 2.0 * n - 1.0) * math.exp(mx)
    return scale * s, scale


def q_n(n: int, x: SimplexPoint, x_prime: SimplexPoint, epsilon: float) -> float:
    """Expansion coefficient Q_n(x, x'); Q_0 = 1 by definition.

    Flags nothing by itself; see griffiths_density for the cancellation
    handling.  The value degrades once the alternating sum cancels more
    than ~10 digits (large n, typical for small t).
    """
    if n < 0:
        raise ValueError("q_n: n must be >= 0")
    if n == 0:
        return 1.0
    k = x.k
    xx = x.coords * x_prime.coords
    if xx.min() <= 0.0:
        raise ValueError("q_n: requires interior points")
    log_xx = np.log(xx)
    cache: dict[int, float] = {}

    def log_xi_at(m: int) -> float:
        if m not in cache:
            cache[m] = _log_xi(m, log_xx, k, float(epsilon))
        return cache[m]

    value, _ = _q_n_terms(n, k * float(epsilon), log_xi_at)
    return value


# --- high-precision resummed weights -----------------------------------

def _weights_dps(t: float, k: int, eps: float, n_max: int) -> int:
    """Working precision for _hp_weights: enough digits to make the largest
    alternating term's absolute rounding error negligible (< 1e-30)."""
    mu = k * eps
    max_log10 = 0.0
    for n in range(1, n_max + 1):
        e_log = -0.5 * (n * (n - 1.0) + mu * n) * t
        for m in (0, n // 2, n):
            term = (
                e_log
                + math.log(mu + 2.0 * n - 1.0)
                + math.log(math.comb(n, m))
                + log_gamma(mu + m + n - 1.0)
                - log_gamma(mu + m)
                - log_gamma(n + 1.0)
            )
            max_log10 = max(max_log10, term / math.log(10.0))
    return int(max_log10) + 40


@lru_cache(maxsize=128)
def _hp_weights(t: float, k: int, eps: float, n_max: int) -> np.ndarray:
    """W_m(t) with sum_n e_n Q_n = sum_m xi_m W_m, computed in mp arithmetic.

    W_m = sum_{n >= max(m,1)} (-1)^{n-m} e_n(t) (mu+2n-1)/n! C(n,m) (mu+m)_{(n-1)},
    plus the n = 0 contribution (Q_0 = 1, xi_0 = 1) folded into W_0.
    """
    with mpmath.workdps(_weights_dps(t, k, eps, n_max)):
        mu = mpmath.mpf(k) * mpmath.mpf(eps)
        tm = mpmath.mpf(t)
        e = [mpmath.e ** (-(mpmath.mpf(n) * (n - 1) + mu * n) * tm / 2) for n in range(n_max + 1)]
        inv_fact = [1 / mpmath.mpf(math.factorial(n)) for n in range(n_max + 1)]
        out = np.empty(n_max + 1)
        for m in range(n_max + 1):
            total = e[0] if m == 0 else mpmath.mpf(0)
            start = max(m, 1)
            rising = mpmath.rf(mu + m, start - 1)  # (mu+m)_{(n-1)} at n = start
            for n in range(start, n_max + 1):
                term = (e[n] * (mu + 2 * n - 1) * inv_fact[n] * math.comb(n, m)) * rising
                total += -term if (n - m) % 2 else term
                rising *= mu + m + n - 1
            out[m] = float(total)
    out.flags.writeable = False
    return out


def griffiths_density(q: GriffithsQuery) -> DensityValue:
    """Transition density via the orthogonal-polynomial expansion.

    Runs the n-ordered scan in float arithmetic with the truncation rule
    (stop after `consecutive_small` terms below tol, n >= 5 required, Q_n
    can grow before the exponential wins).  If the accumulated
    cancellation estimate endangers ~1e-10 relative accuracy, the series
    is re-evaluated as sum_m xi_m W_m(t) with cached high-precision
    weights (mode = "resummed").
    """
    k = q.x.k
    eps = float(q.epsilon)
    mu = k * eps
    trunc = q.trunc
    prefactor = math.exp(_log_dirichlet(q.x.coords, np.full(k, eps)))
    log_xx = np.log(q.x.coords * q.x_prime.coords)
    xi_cache: dict[int, float] = {}

    def log_xi_at(m: int) -> float:
        if m not in xi_cache:
            xi_cache[m] = _log_xi(m, log_xx, k, eps)
        return xi_cache[m]

    total = 0.0
    comp = 0.0
    err_est = 0.0
    cancellation = False
    small_run = 0
    recent: list[float] = []
    converged = False
    n_stop = 0
    for n in range(trunc.max_terms + 1):
        e_n = math.exp(-0.5 * (n * (n - 1.0) + mu * n) * q.t)
        if n == 0:
            term = 1.0
        elif e_n == 0.0:
            term = 0.0
        else:
            qn, max_partial = _q_n_terms(n, mu, log_xi_at)
            if abs(qn) < 1e-10 * max_partial:
                cancellation = True
            err_est += e_n * max_partial * 5e-15
            term = e_n * qn
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
        recent.append(abs(term))
        small_run = small_run + 1 if abs(term) < trunc.tol else 0
        n_stop = n
        if small_run >= trunc.consecutive_small and n >= 5:
            converged = True
            break
    tail = max(recent[-trunc.consecutive_small:]) if recent else math.inf
    mode = "direct"
    series = total
    if err_est > 1e-10 * max(1.0, abs(total)):
        # round the weight count up to a bucket so the (t, k, eps, n_max)
        # cache is shared across nearby queries; extra weights only add
        # negligibly small terms
        n_hp = min(-(-(n_stop + 8) // 8) * 8, trunc.max_terms)
        weights = _hp_weights(q.t, k, eps, n_hp)
        series = math.fsum(
            math.exp(log_xi_at(m)) * weights[m] for m in range(n_hp + 1)
        )
        mode = "resummed"
    return DensityValue(
        value=prefactor * series,
        prefactor=prefactor,
        series_sum=series,
        terms_used=n_stop + 1,
        tail_bound=tail,
        converged=converged,
        cancellation=cancellation,
        mode=mode,
    )


# --- pushforward of the sphere kernel -----------------------------------

@lru_cache(maxsize=None)
def _sign_matrix(k: int) -> np.ndarray:
    arr = np.array(list(itertools.product((1.0, -1.0), repeat=k)))
    arr.flags.writeable = False
    return arr


def pushforward_series_batch(x_batch: np.ndarray, x_other: np.ndarray, t: float,
                             D: float, trunc: Truncation):
    """Sign-summed kernel series 2^{-k} sum_s rho((s*y).y') for a batch of points.

    x_batch: (n, k) interior simplex coordinates; x_other: (k,) interior
    point.  Symmetric in the roles of the two arguments.  Returns
    (series, even, odd, terms_used, tail_bound, converged) with (n,)
    arrays for the first three.
    """
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    x_other = np.asarray(x_other, dtype=float)
    k = x_other.size
    ybatch = np.sqrt(x_batch)
    yother = np.sqrt(x_other)
    signs = _sign_matrix(k)
    dots = signs @ (ybatch * yother).T  # (2^k, n)
    if k == 2:
        angles = np.arccos(np.clip(dots, -1.0, 1.0))
        even, odd, terms, tail, conv = circle_series(angles, t, D, trunc)
    else:
        even, odd, terms, tail, conv = zonal_series(dots, t, D, k, trunc)
    scale = 0.5 ** k
    even_agg = even.sum(axis=0) * scale
    odd_agg = odd.sum(axis=0) * scale
    return even_agg + odd_agg, even_agg, odd_agg, terms, tail, conv


def pushforward_density(q: PushforwardQuery) -> DensityValue:
    """Transition density obtained from the sphere kernel via x_i = y_i^2.

    The y' preimage is fixed to the positive orthant, the y preimages are
    summed over all 2^k sign choices, and the (2^{k-1} prod y_i) Jacobian
    combines with the kernel normalization into the closed prefactor
    Gamma(k/2)/pi^{k/2} * prod x_i^{-1/2}.
    """
    k = q.x.k
    prefactor = math.exp(
        log_gamma(0.5 * k)
        - 0.5 * k * math.log(math.pi)
        - 0.5 * float(np.log(q.x.coords).sum())
    )
    series, even, odd, terms, tail, conv = pushforward_series_batch(
        q.x.coords[None, :], q.x_prime.coords, q.t, q.D, q.trunc
    )
    return DensityValue(
        value=prefactor * float(series[0]),
        prefactor=prefactor,
        series_sum=float(series[0]),
        terms_used=terms,
        tail_bound=tail,
        converged=conv,
        even_part=float(even[0]),
        odd_part=float(odd[0]),
    )
