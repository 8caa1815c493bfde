"""Detector statistics: efficiency, dark counts, ROC, repetition scaling.

Efficiency is defined throughout as the difference of click probabilities
with and without a signal present, E = P(click|signal) - P(click|no signal).
Binomial uncertainties use 95% Wilson score intervals, combined in
quadrature for the difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

__all__ = [
    "DetectionStats",
    "RocCurve",
    "DcrResult",
    "wilson_interval",
    "efficiency",
    "dcr",
    "roc",
    "e_of_n",
    "optimal_n",
    "optimal_n_real",
    "fit_e_of_n",
    "sensitivity_fit",
    "photons_from_energy",
]

Z_95 = 1.959963984540054  # two-sided 95% normal quantile

PLANCK_H = 6.62607015e-34  # J s, exact SI value


def wilson_interval(k: int, n: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n.

    Well-behaved at proportions of exactly 0 and 1, where this detector
    spends most of its life.
    """
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    p = k / n
    denom = 1.0 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)  # exact at the edges
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class DetectionStats:
    """Click probabilities and efficiency for one paired ensemble."""

    p_detect: float
    p_dark: float
    e: float
    ci_low: float
    ci_high: float
    n_shots_s: int
    n_shots_ns: int
    clicks_s: int = 0
    clicks_ns: int = 0

    def as_dict(self) -> dict:
        return {
            "p_detect": self.p_detect,
            "p_dark": self.p_dark,
            "e": self.e,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_shots_s": self.n_shots_s,
            "n_shots_ns": self.n_shots_ns,
            "clicks_s": self.clicks_s,
            "clicks_ns": self.clicks_ns,
        }


def efficiency(
    clicks_s: int, n_s: int, clicks_ns: int, n_ns: int
) -> DetectionStats:
    """Detection efficiency from paired signal/control click counts.

    The 95% bounds on E combine the Wilson half-widths of the two
    proportions in quadrature, per side.
    """
    if n_s < 1 or n_ns < 1:
        raise ValueError("both ensembles need at least one shot")
    p = clicks_s / n_s
    q = clicks_ns / n_ns
    p_lo, p_hi = wilson_interval(clicks_s, n_s)
    q_lo, q_hi = wilson_interval(clicks_ns, n_ns)
    e = p - q
    lo = e - math.hypot(p - p_lo, q_hi - q)
    hi = e + math.hypot(p_hi - p, q - q_lo)
    return DetectionStats(
        p_detect=p,
        p_dark=q,
        e=e,
        ci_low=max(-1.0, lo),
        ci_high=min(1.0, hi),
        n_shots_s=n_s,
        n_shots_ns=n_ns,
        clicks_s=clicks_s,
        clicks_ns=clicks_ns,
    )


@dataclass(frozen=True)
class DcrResult:
    """Latch-corrected dark count rate plus the measurable floor."""

    rate_hz: float
    floor_hz: float
    n_clicks: int
    n_shots: int


def dcr(click_times, n_shots: int, tau_tot: float) -> DcrResult:
    """Dark count rate corrected for latching dead time.

    Because a click latches the detector for the remainder of the pump
    window, the live time of a clicked shot ends at the click:

        DCR = n / (N tau_tot - sum_i (tau_tot - t_i))

    With zero clicks the rate is 0 and ``floor_hz`` = 1/(N tau_tot) reports
    the smallest measurable rate.
    """
    if n_shots < 1 or tau_tot <= 0:
        raise ValueError("need n_shots >= 1 and tau_tot > 0")
    times = np.asarray(list(click_times), dtype=float)
    if times.size and (times.min() < 0 or times.max() > tau_tot):
        raise ValueError("click times must lie within [0, tau_tot]")
    floor = 1.0 / (n_shots * tau_tot)
    if times.size == 0:
        return DcrResult(0.0, floor, 0, n_shots)
    live = n_shots * tau_tot - np.sum(tau_tot - times)
    return DcrResult(float(times.size / live), floor, int(times.size), n_shots)


@dataclass
class RocCurve:
    """Receiver operating characteristic: (p_dark, p_detect) points + AUC."""

    points: list = field(default_factory=list)
    auc: float = 0.0


def roc(stats_sweep) -> RocCurve:
    """ROC curve over a sweep of :class:`DetectionStats`.

    Points are sorted by dark-count probability; the area under the curve
    uses the trapezoid rule with (0,0) and (1,1) appended. A diagonal sweep
    (p_detect == p_dark) scores 0.5, the random binary classifier.
    """
    pts = sorted((s.p_dark, s.p_detect) for s in stats_sweep)
    if not pts:
        raise ValueError("need at least one operating point")
    xs = np.array([0.0] + [p[0] for p in pts] + [1.0])
    ys = np.array([0.0] + [p[1] for p in pts] + [1.0])
    auc = float(np.trapezoid(ys, xs))
    return RocCurve(points=pts, auc=auc)


def e_of_n(n: int, p_detect: float, p_dark: float) -> float:
    """Efficiency of an n-repetition protocol with independent repetitions.

    E(n) = (1 - p_dark)**n - (1 - p_detect)**n; reduces to the single-shot
    efficiency at n = 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0 <= p_detect <= 1 and 0 <= p_dark <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return (1.0 - p_dark) ** n - (1.0 - p_detect) ** n


def optimal_n_real(p_detect: float, p_dark: float) -> float:
    """Real-valued repetition count maximising E(n).

    Solves dE/dn = 0 for the independent-repetition model:

        n* = -ln( ln(1-p_dark) / ln(1-p_detect) )
             / ( ln(1-p_dark) - ln(1-p_detect) )

    Requires 0 < p_dark < p_detect < 1.
    """
    if not (0.0 < p_dark < p_detect < 1.0):
        raise ValueError("need 0 < p_dark < p_detect < 1")
    lq = math.log1p(-p_dark)
    lp = math.log1p(-p_detect)
    return -math.log(lq / lp) / (lq - lp)


def optimal_n(p_detect: float, p_dark: float) -> int | None:
    """Integer repetition count maximising E(n), ties to the smaller n.

    Compares the floor/ceil neighbours of the real-valued optimum rather
    than rounding. Returns ``None`` when ``p_dark == 0``: E(n) is then
    monotone increasing toward its limit and no finite optimum exists.
    """
    if p_dark == 0.0:
        if not (0.0 < p_detect <= 1.0):
            raise ValueError("need 0 < p_detect <= 1")
        return None
    n_star = optimal_n_real(p_detect, p_dark)
    lo = max(1, math.floor(n_star))
    candidates = {lo, lo + 1, 1}
    best = min(candidates)
    best_e = e_of_n(best, p_detect, p_dark)
    for n in sorted(candidates):
        val = e_of_n(n, p_detect, p_dark)
        if val > best_e + 1e-15:
            best, best_e = n, val
    return best


def fit_e_of_n(data) -> tuple[float, float, float]:
    """Fit (p_detect, p_dark) to measured (n, E, weight) triples.

    Weighted least squares on the independent-repetition model, probabilities
    bounded to [0, 1], via Nelder-Mead. Returns (p_detect, p_dark, residual)
    with residual the weighted RMS misfit.
    """
    rows = [(int(n), float(e), float(w)) for n, e, w in data]
    if len({n for n, _, _ in rows}) < 2:
        raise ValueError("need measurements at >= 2 distinct n to fit two probabilities")
    ns = np.array([r[0] for r in rows])
    es = np.array([r[1] for r in rows])
    ws = np.array([r[2] for r in rows])
    if np.any(ws < 0):
        raise ValueError("weights must be >= 0")

    def cost(x):
        p, q = x
        model = (1.0 - q) ** ns - (1.0 - p) ** ns
        return float(np.sum(ws * (model - es) ** 2))

    # moment-style seed: E(1) ~= p - q, late-n decay ~ dark term
    e1 = es[np.argmin(ns)]
    x0 = np.clip([min(0.9, abs(e1) + 0.1), 0.05], 1e-4, 0.999)
    sol = minimize(
        cost,
        x0,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0), (0.0, 1.0)],
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
    )
    if not sol.success:
        raise RuntimeError(f"E(n) fit did not converge: {sol.message}")
    p, q = sol.x
    rms = math.sqrt(sol.fun / max(np.sum(ws), 1e-300))
    return float(p), float(q), rms


def sensitivity_fit(data) -> tuple[float, float]:
    """Fit a log-energy logistic to (energy J, efficiency) points.

    Model: E(J) = A / (1 + exp(-k (log10 J - x0))) with A in (0, 1] and
    k > 0 (efficiency must rise with energy). Returns (j_half, slope) where
    ``j_half`` is the energy at which the fitted curve crosses E = 0.5 and
    ``slope`` is the logistic rate k per decade.

    Raises if fewer than 4 points are supplied, if the fitted slope is not
    positive (non-monotone data), or if the fitted curve never reaches 0.5
    inside the measured energy range.
    """
    rows = [(float(j), float(e)) for j, e in data]
    if len(rows) < 4:
        raise ValueError("need at least 4 points spanning the transition")
    if any(j <= 0 for j, _ in rows):
        raise ValueError("energies must be positive")
    x = np.log10([j for j, _ in rows])
    y = np.array([e for _, e in rows])

    def residuals(theta):
        a, x0, k = theta
        return a / (1.0 + np.exp(-k * (x - x0))) - y

    x0_seed = float(np.median(x))
    sol = least_squares(
        residuals,
        x0=[max(0.5, min(1.0, y.max())), x0_seed, 4.0],
        bounds=([1e-6, x.min() - 5.0, -50.0], [1.0, x.max() + 5.0, 200.0]),
    )
    if not sol.success:
        raise RuntimeError(f"sigmoid fit did not converge: {sol.message}")
    a, x0, k = sol.x
    if k <= 0.1:
        raise ValueError("fitted efficiency is not increasing with energy")
    if a <= 0.5:
        raise ValueError("fitted curve never reaches E = 0.5; no transition in range")
    # solve A/(1+exp(-k(x-x0))) = 0.5
    x_half = x0 - math.log(a / 0.5 - 1.0) / k if a > 0.5 else math.inf
    if not (x.min() - 1.0 <= x_half <= x.max() + 1.0):
        raise ValueError("E = 0.5 crossing lies outside the measured energy range")
    return 10.0**x_half, float(k)


def photons_from_energy(j: float, f: float) -> float:
    """Number of photons of frequency ``f`` (Hz) in a wavepacket of ``j`` joule."""
    if j < 0 or f <= 0:
        raise ValueError("need j >= 0 and f > 0")
    return j / (PLANCK_H * f)
