"""One-port reflection model and (omega0, Q_i, Q_c) extraction.

Model convention (fixed throughout the package):

    S11(w) = [(1/Q_c - 1/Q_i) - 2i (w - w0)/w0] /
             [(1/Q_c + 1/Q_i) + 2i (w - w0)/w0]

so that |S11| -> 1 far off resonance, S11(w0) = 0 at critical coupling
(Q_i = Q_c), and the absorbed fraction 1 - |S11(w0)|^2 matches the standard
input-output result for a single-port cavity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "ReflectionSpectrum",
    "s11_model",
    "fit_s11",
    "subtract_baseline",
    "read_spectrum_csv",
    "write_spectrum_csv",
]


@dataclass
class ReflectionSpectrum:
    """A sampled S11 trace: strictly increasing freqs (Hz), complex s11."""

    freqs: np.ndarray
    s11: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.s11 = np.asarray(self.s11, dtype=complex)
        if self.freqs.ndim != 1 or self.freqs.shape != self.s11.shape:
            raise ValueError("freqs and s11 must be 1-d arrays of equal length")
        if self.freqs.size < 2 or np.any(np.diff(self.freqs) <= 0):
            raise ValueError("freqs must be strictly increasing with >= 2 points")


def s11_model(omega, omega0: float, q_i: float, q_c: float):
    """Complex reflection coefficient at angular frequency ``omega`` (rad/s).

    Accepts scalars or arrays. Quality factors must be positive.
    """
    if q_i <= 0 or q_c <= 0 or omega0 <= 0:
        raise ValueError("omega0, q_i, q_c must be positive")
    x = 2.0 * (np.asarray(omega, dtype=float) - omega0) / omega0
    num = (1.0 / q_c - 1.0 / q_i) - 1j * x
    den = (1.0 / q_c + 1.0 / q_i) + 1j * x
    return num / den


def subtract_baseline(
    spec: ReflectionSpectrum, baseline: ReflectionSpectrum
) -> ReflectionSpectrum:
    """Remove a background trace by complex division s11 / baseline.

    Both spectra must share the exact frequency grid; zero baseline points
    are rejected. The ratio convention suits off-resonance-normalised traces
    (baseline measured with the resonance tuned away).
    """
    if spec.freqs.shape != baseline.freqs.shape or not np.array_equal(
        spec.freqs, baseline.freqs
    ):
        raise ValueError("baseline frequency grid does not match the spectrum")
    if np.any(baseline.s11 == 0):
        raise ValueError("baseline contains zero points; cannot divide")
    return ReflectionSpectrum(
        freqs=spec.freqs.copy(),
        s11=spec.s11 / baseline.s11,
        metadata=dict(spec.metadata),
    )


def _initial_guess(spec: ReflectionSpectrum) -> tuple[float, float, float]:
    """Seed (omega0, q_i, q_c) from the |S11| dip position and width."""
    mag = np.abs(spec.s11)
    i_min = int(np.argmin(mag))
    f0 = spec.freqs[i_min]
    # half-depth width as a loaded-linewidth proxy
    floor = np.median(mag[[0, -1]])
    half = 0.5 * (mag[i_min] + floor)
    above = mag > half
    lo = i_min
    while lo > 0 and not above[lo]:
        lo -= 1
    hi = i_min
    while hi < len(mag) - 1 and not above[hi]:
        hi += 1
    width = max(spec.freqs[hi] - spec.freqs[lo], spec.freqs[1] - spec.freqs[0])
    q_l = max(f0 / width, 10.0)
    # split the loaded Q using the dip depth: S11(w0) = (1/qc - 1/qi)/(1/qc + 1/qi)
    depth = np.clip(mag[i_min] / max(floor, 1e-12), 0.0, 0.999)
    # assume undercoupled (q_i < q_c), the regime this package targets
    q_i0 = 2.0 * q_l / (1.0 + depth)
    q_c0 = 2.0 * q_l / max(1.0 - depth, 1e-3)
    return 2.0 * np.pi * f0, q_i0, q_c0


def fit_s11(
    spec: ReflectionSpectrum,
    initial: tuple[float, float, float] | None = None,
) -> tuple[float, float, float, float]:
    """Least-squares fit of the one-port model to a spectrum.

    Parameters
    ----------
    spec:
        Spectrum to fit; should span at least ~3 linewidths.
    initial:
        Optional (omega0 rad/s, q_i, q_c) seed; auto-initialised from the
        |S11| minimum and half-depth width otherwise.

    Returns
    -------
    (omega0, q_i, q_c, residual) with omega0 in rad/s and residual the RMS
    of the stacked real/imaginary misfit per point.
    """
    omega = 2.0 * np.pi * spec.freqs
    if initial is None:
        initial = _initial_guess(spec)
    w0_0, qi_0, qc_0 = initial
    if not (omega[0] < w0_0 < omega[-1]):
        raise ValueError("resonance estimate falls outside the measured span")

    scale = np.array([w0_0, qi_0, qc_0])

    def residuals(p):
        w0, qi, qc = np.abs(p) * scale
        model = s11_model(omega, w0, qi, qc)
        d = model - spec.s11
        return np.concatenate([d.real, d.imag])

    sol = least_squares(residuals, x0=np.ones(3), method="lm", xtol=1e-14)
    if not sol.success:
        raise RuntimeError(f"S11 fit did not converge: {sol.message}")
    w0, qi, qc = np.abs(sol.x) * scale
    if not (omega[0] < w0 < omega[-1]):
        raise RuntimeError("fitted resonance lies outside the measured span")
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return float(w0), float(qi), float(qc), rms


def write_spectrum_csv(path, spec: ReflectionSpectrum, header_lines=()) -> None:
    """Write a spectrum as CSV columns (freq_hz, re_s11, im_s11)."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "re_s11", "im_s11"])
        for f, s in zip(spec.freqs, spec.s11):
            writer.writerow([repr(float(f)), repr(float(s.real)), repr(float(s.imag))])


def read_spectrum_csv(path) -> ReflectionSpectrum:
    """Read a (freq_hz, re_s11, im_s11) CSV written by this package."""
    freqs: list[float] = []
    vals: list[complex] = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["freq_hz", "re_s11", "im_s11"]:
        raise ValueError(f"{path}: expected header freq_hz,re_s11,im_s11")
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            freqs.append(float(row[0]))
            vals.append(complex(float(row[1]), float(row[2])))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: malformed CSV at data line {lineno}") from exc
    return ReflectionSpectrum(np.array(freqs), np.array(vals))
