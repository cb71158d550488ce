"""Two-sample significance machinery.

Welch's unequal-variance t-test with exact t-distribution p-values, and the
Mann-Whitney U test with midranks, tie-corrected variance and a
continuity-corrected normal approximation. The t CDF is computed through the
regularized incomplete beta function, evaluated with the modified Lentz
continued fraction (absolute accuracy well below 1e-10); the normal CDF uses
the C library erfc.

Degenerate inputs do not raise: two constant samples with equal means give
p = 1, with unequal means p = 0, and an all-tied U test gives p = 1; such
results carry degenerate=True.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

_BETACF_MAX_ITER = 400
_BETACF_EPS = 1e-16
_BETACF_FPMIN = 1e-300


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_two_sided: float
    n1: int
    n2: int
    method: str
    degrees_of_freedom: Optional[float] = None  # t tests only
    degenerate: bool = False


# ---------------------------------------------------------------------------
# regularized incomplete beta and the t distribution
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_FPMIN:
        d = _BETACF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0, x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_cdf(x: float, df: float) -> float:
    """CDF of Student's t with df degrees of freedom. t_cdf(0) == 0.5 exactly
    and t_cdf(x) + t_cdf(-x) == 1 to within one rounding."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x == 0.0:
        return 0.5
    tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + x * x))
    return tail if x < 0 else 1.0 - tail


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) under Student's t."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t))


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------

def mean_diff(a, b) -> float:
    """mean(a) - mean(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("mean_diff needs two non-empty samples")
    return float(np.mean(a) - np.mean(b))


def welch_t(a, b, pooled: bool = False) -> TestResult:
    """Two-sample t-test for a difference in means.

    Default is Welch's unequal-variance form with Welch-Satterthwaite
    degrees of freedom; pooled=True gives the classic equal-variance test.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = a.size, b.size
    if n1 < 2 or n2 < 2:
        raise ValueError("welch_t needs at least 2 observations per sample")
    m1, m2 = float(np.mean(a)), float(np.mean(b))
    v1 = float(np.var(a, ddof=1))
    v2 = float(np.var(b, ddof=1))
    method = "student-t" if pooled else "welch-t"

    if v1 == 0.0 and v2 == 0.0:
        if m1 == m2:
            return TestResult(0.0, 1.0, n1, n2, method,
                              degrees_of_freedom=float(n1 + n2 - 2), degenerate=True)
        stat = math.inf if m1 > m2 else -math.inf
        return TestResult(stat, 0.0, n1, n2, method,
                          degrees_of_freedom=float(n1 + n2 - 2), degenerate=True)

    if pooled:
        df = float(n1 + n2 - 2)
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        se = math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))
    else:
        q1, q2 = v1 / n1, v2 / n2
        se = math.sqrt(q1 + q2)
        df = (q1 + q2) ** 2 / (q1 * q1 / (n1 - 1) + q2 * q2 / (n2 - 1))
    t = (m1 - m2) / se
    return TestResult(t, t_two_sided_p(t, df), n1, n2, method,
                      degrees_of_freedom=df)


def paired_t(a, b) -> TestResult:
    """One-sample t-test on paired differences a - b (sensitivity option)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size != b.size:
        raise ValueError("paired_t needs equal-length samples")
    d = a - b
    n = d.size
    if n < 2:
        raise ValueError("paired_t needs at least 2 pairs")
    m = float(np.mean(d))
    v = float(np.var(d, ddof=1))
    if v == 0.0:
        if m == 0.0:
            return TestResult(0.0, 1.0, n, n, "paired-t",
                              degrees_of_freedom=float(n - 1), degenerate=True)
        stat = math.inf if m > 0 else -math.inf
        return TestResult(stat, 0.0, n, n, "paired-t",
                          degrees_of_freedom=float(n - 1), degenerate=True)
    t = m / math.sqrt(v / n)
    df = float(n - 1)
    return TestResult(t, t_two_sided_p(t, df), n, n, "paired-t",
                      degrees_of_freedom=df)


def _midranks(z: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the average of their rank block."""
    order = np.argsort(z, kind="stable")
    sz = z[order]
    ranks = np.empty(z.size, dtype=np.float64)
    i = 0
    while i < sz.size:
        j = i
        while j + 1 < sz.size and sz[j + 1] == sz[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(a, b) -> TestResult:
    """Mann-Whitney U from midranks; tie-corrected variance; two-sided p by
    normal approximation with continuity correction. The statistic is U for
    the first sample: n1*n2 when every a exceeds every b, 0 when reversed."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = a.size, b.size
    if n1 < 1 or n2 < 1:
        raise ValueError("mann_whitney_u needs non-empty samples")
    z = np.concatenate([a, b])
    n = n1 + n2
    ranks = _midranks(z)
    r1 = float(np.sum(ranks[:n1]))
    u1 = r1 - n1 * (n1 + 1) / 2.0

    _, counts = np.unique(z, return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    if tie_term == float(n) ** 3 - n:
        # every value identical: no ordering information
        return TestResult(u1, 1.0, n1, n2, "mann-whitney-u", degenerate=True)
    var_u = (n1 * n2 / 12.0) * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    mu = n1 * n2 / 2.0
    diff = u1 - mu
    adj = abs(diff) - 0.5  # continuity correction
    if adj <= 0.0 or var_u <= 0.0:
        return TestResult(u1, 1.0, n1, n2, "mann-whitney-u")
    zstat = adj / math.sqrt(var_u)
    p = min(1.0, math.erfc(zstat / math.sqrt(2.0)))
    return TestResult(u1, p, n1, n2, "mann-whitney-u")
