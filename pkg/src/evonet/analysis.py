"""Empirical vs analytic comparison and discrete power-law tail fitting."""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy import optimize, special, stats

from .errors import InsufficientTail
from .solver import DegreeDistribution

__all__ = [
    "TailFit",
    "ComparisonReport",
    "RunManifest",
    "as_probabilities",
    "tv_distance",
    "kolmogorov_distance",
    "estimate_tail_exponent",
    "select_kmin",
    "compare",
    "trend_test",
    "loglog_curvature",
]

MIN_TAIL = 100
GAMMA_BOUNDS = (1.0 + 1e-6, 60.0)


def as_probabilities(hist) -> tuple[np.ndarray, float]:
    """Return ``(p, residual)`` from integer counts or a (sub-)probability vector.

    Counts are normalised by their total.  A float vector summing to at most
    one is taken as probabilities with the missing mass lying beyond its end.
    """
    h = np.asarray(hist)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("histogram must be a non-empty 1-d array")
    if np.any(h < 0):
        raise ValueError("negative histogram entry")
    if np.issubdtype(h.dtype, np.integer):
        total = h.sum()
        if total == 0:
            raise ValueError("empty histogram")
        return h / total, 0.0
    h = h.astype(float)
    s = math.fsum(h)
    if s <= 1 + 1e-9:
        return h, max(0.0, 1.0 - s)
    return h / s, 0.0


def _aligned(pa, pe, K):
    a = np.zeros(K + 1)
    e = np.zeros(K + 1)
    a[: min(K + 1, len(pa))] = pa[: K + 1]
    e[: min(K + 1, len(pe))] = pe[: K + 1]
    return a, e


def tv_distance(p, q, K: int | None = None) -> float:
    """Half the l1 distance over ``k <= K`` plus the difference of the masses beyond ``K``."""
    p, rp = as_probabilities(p)
    q, rq = as_probabilities(q)
    K = max(len(p), len(q)) - 1 if K is None else K
    a, e = _aligned(p, q, K)
    tail_a = rp + math.fsum(p[K + 1 :])
    tail_e = rq + math.fsum(q[K + 1 :])
    return 0.5 * (math.fsum(np.abs(a - e)) + abs(tail_a - tail_e))


def kolmogorov_distance(p, q, K: int | None = None) -> float:
    p, _ = as_probabilities(p)
    q, _ = as_probabilities(q)
    K = max(len(p), len(q)) - 1 if K is None else K
    a, e = _aligned(p, q, K)
    return float(np.max(np.abs(np.cumsum(a) - np.cumsum(e))))


# ---------------------------------------------------------------------------
# tail fitting


@dataclass(frozen=True)
class TailFit:
    """Discrete power-law fit on ``k >= k_min``.

    ``lr_statistic`` is the normalised log-likelihood ratio of the power law
    against a discrete exponential on the same support (positive favours the
    power law) and ``lr_pvalue`` its two-sided significance.
    """

    gamma: float
    std_err: float
    k_min: int
    n_tail: int
    loglog_slope: float
    lr_statistic: float
    lr_pvalue: float
    ks_distance: float

    @property
    def power_law_accepted(self) -> bool:
        return self.lr_statistic > 0 and self.lr_pvalue < 0.05

    def __iter__(self):
        yield self.gamma
        yield self.std_err

    def to_dict(self) -> dict:
        out = asdict(self)
        out["power_law_accepted"] = self.power_law_accepted
        return out


def _tail(hist, k_min):
    h = np.asarray(hist, dtype=float)
    if k_min < 1:
        raise ValueError("k_min must be >= 1 for a power-law fit")
    ks = np.arange(k_min, len(h))
    c = h[k_min:]
    keep = c > 0
    return ks[keep], c[keep]


def _zeta_mle(mean_log, k_min):
    def nll(g):
        return g * mean_log + math.log(special.zeta(g, k_min))

    res = optimize.minimize_scalar(nll, bounds=GAMMA_BOUNDS, method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def _zeta_fisher(gamma, k_min):
    """Per-observation Fisher information ``d^2/dg^2 log zeta(g, k_min)``."""
    z = mpmath.zeta(gamma, k_min)
    z1 = mpmath.zeta(gamma, k_min, 1)
    z2 = mpmath.zeta(gamma, k_min, 2)
    return float(z2 / z - (z1 / z) ** 2)


def _tail_ks(ks, w, gamma, k_min):
    """Max CDF gap between the tail sample and the fitted law."""
    emp = np.cumsum(w)
    model = 1.0 - special.zeta(gamma, ks + 1) / special.zeta(gamma, k_min)
    return float(np.max(np.abs(emp - model)))


def estimate_tail_exponent(hist, k_min: int, auto_kmin: bool = False) -> TailFit:
    """Discrete maximum-likelihood exponent for ``P(k) ∝ k^-gamma``, ``k >= k_min``.

    ``hist[k]`` holds counts (or any non-negative weights proportional to
    counts; only the proportions enter the estimate).  With ``auto_kmin`` the
    cut-off minimising the tail KS distance is used instead of ``k_min``,
    searching upward from ``k_min``.
    """
    if auto_kmin:
        k_min = select_kmin(hist, k_lo=k_min)
    ks, c = _tail(hist, k_min)
    n = float(c.sum())
    if n < MIN_TAIL:
        raise InsufficientTail(f"{n:g} observations with k >= {k_min}; need {MIN_TAIL}")
    w = c / c.sum()
    logk = np.log(ks)
    mean_log = float(np.dot(w, logk))
    gamma = _zeta_mle(mean_log, k_min)
    info = _zeta_fisher(gamma, k_min)
    std_err = 1.0 / math.sqrt(n * info) if info > 0 else math.inf
    # log-log least squares on the occupied bins
    if len(ks) >= 2:
        slope = float(np.polyfit(logk, np.log(w), 1)[0])
    else:
        slope = math.nan
    # likelihood ratio against a discrete exponential on k >= k_min
    excess = float(np.dot(w, ks)) - k_min
    ll_pl = -gamma * logk - math.log(special.zeta(gamma, k_min))
    if excess > 0:
        lam = math.log1p(1.0 / excess)
        ll_ex = math.log(-math.expm1(-lam)) - lam * (ks - k_min)
    else:
        ll_ex = np.zeros_like(logk)
    diff = ll_pl - ll_ex
    mean_diff = float(np.dot(w, diff))
    var = float(np.dot(w, (diff - mean_diff) ** 2))
    if var > 0:
        stat = mean_diff * math.sqrt(n) / math.sqrt(var)
        pval = float(special.erfc(abs(stat) / math.sqrt(2)))
    else:
        stat, pval = 0.0, 1.0
    ks_dist = _tail_ks(ks, w, gamma, k_min)
    return TailFit(gamma, std_err, int(k_min), int(round(n)), slope, stat, pval, ks_dist)


def select_kmin(hist, k_lo: int = 1, min_tail: int = MIN_TAIL) -> int:
    """Cut-off minimising the KS distance between the tail and its fitted zeta law."""
    h = np.asarray(hist, dtype=float)
    k_lo = max(1, k_lo)
    tail_counts = np.cumsum(h[::-1])[::-1]
    best, best_k = math.inf, None
    for k in range(k_lo, len(h)):
        if tail_counts[k] < min_tail:
            break
        if h[k] == 0:
            continue
        ks, c = _tail(h, k)
        w = c / c.sum()
        g = _zeta_mle(float(np.dot(w, np.log(ks))), k)
        d = _tail_ks(ks, w, g, k)
        if d < best:
            best, best_k = d, k
    if best_k is None:
        raise InsufficientTail(f"fewer than {min_tail} observations above k = {k_lo}")
    return best_k


def loglog_curvature(hist, k_min: int, bins_per_decade: int = 10) -> tuple[float, float]:
    """Quadratic coefficient of ``log p`` against ``log k`` on log-spaced bins.

    Returns ``(coefficient, std_err)``; a significantly negative coefficient
    means the local slope keeps steepening, which a power law does not do.
    """
    p, _ = as_probabilities(hist)
    k_max = len(p) - 1
    if k_max <= k_min:
        raise InsufficientTail("no support above k_min")
    edges = np.unique(np.floor(np.logspace(
        np.log10(k_min), np.log10(k_max + 1), int(bins_per_decade * np.log10((k_max + 1) / k_min)) + 2
    )).astype(int))
    x, y = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mass = p[lo:hi].sum()
        if mass > 0:
            x.append(math.log(math.sqrt(lo * (hi - 1)) if hi - 1 > lo else lo))
            y.append(math.log(mass / (hi - lo)))
    if len(x) < 4:
        raise InsufficientTail("too few occupied bins for a curvature fit")
    coef, cov = np.polyfit(x, y, 2, cov=True)
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def trend_test(values, alpha: float = 0.05) -> tuple[bool, list[float]]:
    """Is a per-replica series non-increasing up to noise?

    ``values`` has shape (replicas, snapshots).  Each consecutive pair is
    tested for a significant increase with a one-sided paired t-test; the
    series passes when no pair shows one.  Returns ``(passed, p_values)``.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.shape[1] < 2:
        raise ValueError("need a (replicas, snapshots) array with >= 2 snapshots")
    pvals = []
    for j in range(v.shape[1] - 1):
        d = v[:, j + 1] - v[:, j]
        if v.shape[0] < 2 or np.all(d == d[0]):
            pvals.append(0.0 if d[0] > 0 else 1.0)
            continue
        pvals.append(float(stats.ttest_1samp(d, 0.0, alternative="greater").pvalue))
    return all(pv >= alpha for pv in pvals), pvals


# ---------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonReport:
    tv_distance: float
    kolmogorov_distance: float
    per_k: list[tuple[int, float, float, float]]
    tail_fit: TailFit | None
    classification: str
    classification_agreement: bool
    K: int

    def to_dict(self) -> dict:
        return {
            "tv_distance": self.tv_distance,
            "kolmogorov_distance": self.kolmogorov_distance,
            "K": self.K,
            "classification": self.classification,
            "classification_agreement": self.classification_agreement,
            "tail_fit": None if self.tail_fit is None else self.tail_fit.to_dict(),
        }


def compare(
    analytic: DegreeDistribution,
    empirical,
    K: int,
    k_min: int | None = None,
    auto_kmin: bool = False,
) -> ComparisonReport:
    """TV and KS distances on ``k <= K`` plus a tail fit of the empirical law."""
    if K < analytic.M:
        raise ValueError("K must be >= M")
    pa = analytic.pmf(K)
    pe, resid = as_probabilities(empirical)
    a, e = _aligned(pa, pe, K)
    tail_a = max(0.0, 1.0 - math.fsum(a))
    tail_e = resid + math.fsum(pe[K + 1 :])
    tv = 0.5 * (math.fsum(np.abs(a - e)) + abs(tail_a - tail_e))
    ks = float(np.max(np.abs(np.cumsum(a) - np.cumsum(e))))
    per_k = [(k, float(a[k]), float(e[k]), float(abs(a[k] - e[k]))) for k in range(K + 1)]
    fit = None
    k_min = max(1, analytic.M) if k_min is None else k_min
    h = np.asarray(empirical)
    try:
        fit = estimate_tail_exponent(h, k_min, auto_kmin=auto_kmin)
    except InsufficientTail:
        fit = None
    scale_free = analytic.classification.scale_free
    if fit is None:
        agree = not scale_free
    else:
        agree = fit.power_law_accepted == scale_free
    return ComparisonReport(tv, ks, per_k, fit, analytic.classification.label, agree, K)


@dataclass
class RunManifest:
    """Everything needed to rerun a command bit-for-bit."""

    command: str
    config: dict
    seed: int | None
    code_version: str
    rng: str
    outputs: list[str] = field(default_factory=list)
    started: str = field(default_factory=lambda: _now())
    finished: str | None = None

    def finish(self) -> None:
        self.finished = _now()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
