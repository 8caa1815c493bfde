"""Quadrature-space dynamics of the parametrically pumped Duffing oscillator.

Everything here lives in the frame rotating at half the pump frequency and
additionally rotated so the three-wave mixing strength is real and positive;
drive phases are interpreted in that frame. For intracavity field a = X - iY
the deterministic flow is

    dX/dt = -gbar X + (zeta - Delta - K n) Y + sqrt(kappa) Re a_in
    dY/dt = (zeta + Delta + K n) X - gbar Y  - sqrt(kappa) Im a_in

with n = X^2 + Y^2 the instantaneous photon number. The same flow is the
damped gradient of the metapotential g(X, Y) (see :func:`metapotential`).

Stochastic integration uses fixed-step Euler-Maruyama with additive Gaussian
noise of per-quadrature variance sigma^2 dt, sigma^2 = rate * (kappa+gamma)/2
* scale; the default (rate=0.5, scale=1) is half a photon of vacuum variance
per quadrature. Each shot consumes an independent counter-based (Philox)
stream keyed by its seed, so trajectories are bit-reproducible no matter how
an ensemble is batched or parallelised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .device import OperatingPoint, TlsModel, q_i_of_nbar

__all__ = [
    "NoiseConfig",
    "DriveSegment",
    "QuadratureTrajectory",
    "SteadyState",
    "SteadyStateSet",
    "EnsembleResult",
    "metapotential",
    "drift",
    "steady_states",
    "integrate",
    "integrate_ensemble",
    "hysteresis_sweep",
    "derive_shot_seed",
    "philox_stream",
    "write_trajectory_csv",
]

# photon number separating "quiet" from "self-oscillating": far above
# amplified vacuum, far below the ~1e5+ photons of developed oscillation
N_OSC_THRESHOLD = 1e3

_CHUNK = 1024  # RNG/noise buffering granularity (steps); fixed for determinism
_MASK64 = (1 << 64) - 1


_SM64_GAMMA = 0x9E3779B97F4A7C15


def derive_shot_seed(base_seed: int, shot_index: int) -> int:
    """Per-shot 64-bit stream key, counter-derived from the run's base seed.

    SplitMix64 finalizer of base_seed + shot_index * gamma: order-independent
    (shot k gets the same stream no matter how the ensemble is batched) and
    different base seeds yield unrelated stream sets. A plain XOR of base and
    index would make two runs with small base seeds mere permutations of one
    another.
    """
    z = (int(base_seed) + (int(shot_index) + 1) * _SM64_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def philox_stream(seed: int, salt: int = 0) -> np.random.Generator:
    """Counter-based generator for ``seed``; ``salt`` separates stream uses.

    The integrator consumes salt 0; callers needing extra per-shot draws
    (e.g. random initial perturbations) should use a nonzero salt so the two
    streams never overlap.
    """
    key = ((salt & 0xFFFF) << 64) | (int(seed) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class NoiseConfig:
    """Input-noise strength for the stochastic integrator.

    ``rate`` is the effective noise occupancy in quanta (0.5 = vacuum);
    ``scale`` is an overall dimensionless multiplier. Per-quadrature noise
    variance per unit time is rate * (kappa+gamma)/2 * scale.
    """

    rate: float = 0.5
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.rate < 0 or self.scale < 0:
            raise ValueError("noise rate and scale must be >= 0")

    @property
    def off(self) -> bool:
        return self.rate == 0.0 or self.scale == 0.0


@dataclass(frozen=True)
class DriveSegment:
    """A coherent input-field segment.

    ``amplitude`` is photon-flux normalised: |a_in|^2 is the incident photon
    flux in photons/s, so amplitude = sqrt(P / (hbar omega)). ``phase`` is
    measured in the zeta-real simulation frame. Envelopes: ``rectangular``
    or ``gaussian`` (centred on the segment, sigma defaulting to a quarter of
    the duration, truncated at the segment edges).
    """

    t_start: float
    t_end: float
    amplitude: float
    phase: float = 0.0
    envelope: str = "rectangular"
    sigma: float | None = None

    def __post_init__(self) -> None:
        if self.t_end <= self.t_start:
            raise ValueError("drive segment needs t_end > t_start")
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be >= 0")
        if self.envelope not in ("rectangular", "gaussian"):
            raise ValueError(f"unknown envelope {self.envelope!r}")

    def value(self, t):
        """Complex a_in(t); zero outside [t_start, t_end)."""
        t = np.asarray(t, dtype=float)
        inside = (t >= self.t_start) & (t < self.t_end)
        if self.envelope == "rectangular":
            env = inside.astype(float)
        else:
            sig = self.sigma if self.sigma is not None else 0.25 * (
                self.t_end - self.t_start
            )
            mid = 0.5 * (self.t_start + self.t_end)
            env = np.exp(-0.5 * ((t - mid) / sig) ** 2) * inside
        return self.amplitude * env * np.exp(1j * self.phase)


@dataclass
class QuadratureTrajectory:
    """Sampled (X, Y) record of one integration.

    ``q_i_track`` carries the effective internal Q at each sample when TLS
    feedback was active (constant otherwise). Replaying with the same seed,
    inputs and dt reproduces the samples bit-exactly.
    """

    dt: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    q_i_track: np.ndarray
    rng_seed: int

    @property
    def nbar(self) -> np.ndarray:
        return self.x**2 + self.y**2

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class SteadyState:
    alpha: float
    theta: float


@dataclass(frozen=True)
class SteadyStateSet:
    """Closed-form fixed points: the quiet origin plus 0 or 2 oscillating."""

    quiet: tuple[float, float] = (0.0, 0.0)
    oscillating: tuple[SteadyState, ...] = ()


def metapotential(x, y, op: OperatingPoint):
    """Metapotential g(X, Y) whose damped gradient flow is the drift.

    g = (Delta/2 gbar)(X^2+Y^2) + (zeta/2 gbar)(X^2-Y^2)
        + (K/4 gbar)(X^2+Y^2)^2

    zeta enters through its magnitude: the frame is rotated so the coupling
    is real and positive.
    """
    if op.gamma_bar <= 0:
        raise ValueError("gamma_bar must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x**2 + y**2
    g = (
        0.5 * op.delta_big * n
        + 0.5 * op.zeta_mag * (x**2 - y**2)
        + 0.25 * op.kerr * n**2
    ) / op.gamma_bar
    return g if g.ndim else float(g)


def drift(state, op: OperatingPoint, drive: DriveSegment | None = None, t: float = 0.0):
    """Deterministic (dX/dt, dY/dt) at ``state``, optionally driven.

    The input drive enters as sqrt(kappa) (Re a_in, -Im a_in), following the
    a = X - iY quadrature convention.
    """
    x = np.asarray(state[0], dtype=float)
    y = np.asarray(state[1], dtype=float)
    n = x**2 + y**2
    kn = op.kerr * n
    dx = -op.gamma_bar * x + (op.zeta_mag - op.delta_big - kn) * y
    dy = (op.zeta_mag + op.delta_big + kn) * x - op.gamma_bar * y
    if drive is not None:
        a_in = drive.value(t)
        rt_kappa = math.sqrt(op.kappa)
        dx = dx + rt_kappa * np.real(a_in)
        dy = dy - rt_kappa * np.imag(a_in)
    if dx.ndim:
        return dx, dy
    return float(dx), float(dy)


def steady_states(op: OperatingPoint) -> SteadyStateSet:
    """Closed-form fixed points of the undriven flow.

    The quiet origin is always returned. When zeta^2 > Delta^2 + gbar^2 the
    pair of self-oscillating states exists, with amplitude

        alpha = sqrt((s sqrt(zeta^2 - gbar^2) - Delta) / K)

    where the sign s is chosen to make the radicand positive (s = -sign(K)),
    and phases theta, theta + pi satisfying the stationarity pair

        tan(theta) = (zeta + Delta + alpha^2 K) / gbar
        cot(theta) = (zeta - Delta - alpha^2 K) / gbar

    read off the quadrature flow itself (both fixed-point equations of
    :func:`drift` vanish there; the integrator converges onto these states).
    A vanishing Kerr rate leaves nothing to arrest the growth, so K = 0
    above the boundary is an error.
    """
    z, d, gb, k = op.zeta_mag, op.delta_big, op.gamma_bar, op.kerr
    if z**2 <= d**2 + gb**2:
        return SteadyStateSet()
    if k == 0.0:
        raise ValueError(
            "zeta^2 > Delta^2 + gamma_bar^2 with zero Kerr rate: "
            "oscillation amplitude is unbounded"
        )
    root = math.sqrt(z**2 - gb**2)
    s = 1.0 if k > 0 else -1.0
    alpha_sq = (s * root - d) / k
    alpha = math.sqrt(alpha_sq)
    theta = math.atan((z + d + alpha_sq * k) / gb)
    return SteadyStateSet(
        oscillating=(
            SteadyState(alpha, theta),
            SteadyState(alpha, theta + math.pi),
        )
    )


# ---------------------------------------------------------------------------
# stochastic integration engine


@dataclass
class EnsembleResult:
    """Per-shot outcomes of a batched integration."""

    seeds: np.ndarray
    final_x: np.ndarray
    final_y: np.ndarray
    max_amp: np.ndarray  # max sqrt(n) over samples inside pump windows
    t_click: np.ndarray  # first threshold crossing (s); nan when none
    q_i_final: np.ndarray
    phase_offsets: np.ndarray
    trajectories: list[QuadratureTrajectory] | None = None

    @property
    def clicked(self) -> np.ndarray:
        return ~np.isnan(self.t_click)


def _snap(t: float, dt: float) -> int:
    return int(round(t / dt))


def _merged_index_intervals(seq, dt: float, n_total: int) -> list[tuple[int, int]]:
    """Pump windows united with drive spans, as merged step-index intervals."""
    raw = []
    for w0, w1 in seq.pump_windows:
        raw.append((_snap(w0, dt), _snap(w1, dt)))
    for d in seq.drives:
        raw.append((_snap(d.t_start, dt), _snap(d.t_end, dt)))
    raw = [(max(0, a), min(n_total, b)) for a, b in raw if b > a]
    if not raw:
        return []
    raw.sort()
    merged = [list(raw[0])]
    for a, b in raw[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def integrate_ensemble(
    seq,
    op: OperatingPoint,
    *,
    dt: float = 1e-9,
    seeds,
    noise: NoiseConfig | None = None,
    tls: TlsModel | None = None,
    tau_tls: float = 1e-6,
    phase_offsets=None,
    draw_phase_offsets: bool = False,
    initial_states=None,
    amp_threshold: float | None = None,
    record_stride: int = 0,
    gap_skip: bool = True,
) -> EnsembleResult:
    """Integrate one pulse sequence for an ensemble of independently seeded shots.

    Parameters
    ----------
    seq:
        Object with ``total_duration`` (s), ``pump_windows`` (sorted list of
        (t_on, t_off)) and ``drives`` (list of :class:`DriveSegment`).
    op:
        Operating point; its pump (zeta, delta_p) acts only inside pump
        windows. TLS feedback needs ``op.omega0``/``op.kappa``.
    seeds:
        One 64-bit stream key per shot (see :func:`derive_shot_seed`).
    tls:
        When given, the internal Q follows a low-pass filtered photon number
        (time constant ``tau_tls``) through the saturation law, and gamma,
        gamma_bar are recomputed every step.
    phase_offsets / draw_phase_offsets:
        Either an explicit per-shot phase added to every drive segment, or
        one uniform draw on [0, 2 pi) per shot (the phase-modulated pump).
    amp_threshold:
        Click threshold on sqrt(X^2+Y^2); crossings are only counted at
        samples inside pump windows and the first crossing time is latched.
    record_stride:
        If > 0, record every stride-th sample (plus the final one) for each
        shot; incompatible with ``gap_skip``.
    gap_skip:
        Fast-forward the stretches with no pump and no drive using the exact
        Ornstein-Uhlenbeck transition (decay exp(-gbar dt_gap) plus a
        stationary-variance noise refresh). Exact for the linear pump-off
        cavity; nothing can click there.
    """
    if noise is None:
        noise = NoiseConfig()
    if dt <= 0:
        raise ValueError("dt must be positive")
    gb0 = op.gamma_bar
    if gb0 * dt >= 0.1:
        raise ValueError(
            f"dt too large: gamma_bar*dt = {gb0 * dt:.3g} >= 0.1; reduce dt"
        )
    if record_stride and gap_skip:
        raise ValueError("trajectory recording requires gap_skip=False")
    if tls is not None and (math.isnan(op.omega0) or op.omega0 <= 0):
        raise ValueError("TLS feedback needs an operating point with omega0")

    seeds = np.asarray(list(seeds), dtype=np.uint64)
    w = seeds.size
    if w == 0:
        raise ValueError("need at least one shot")
    gens = [philox_stream(int(s)) for s in seeds]

    if phase_offsets is not None and draw_phase_offsets:
        raise ValueError("give phase_offsets or draw_phase_offsets, not both")
    if draw_phase_offsets:
        offsets = np.array([g.uniform(0.0, 2.0 * math.pi) for g in gens])
    elif phase_offsets is not None:
        offsets = np.broadcast_to(np.asarray(phase_offsets, float), (w,)).copy()
    else:
        offsets = np.zeros(w)

    x = np.empty(w)
    y = np.empty(w)
    if initial_states is None:
        x[:] = 0.0
        y[:] = 0.0
    else:
        init = np.broadcast_to(np.asarray(initial_states, float), (w, 2))
        x[:] = init[:, 0]
        y[:] = init[:, 1]

    n_total = max(1, _snap(seq.total_duration, dt))
    windows_idx = [(_snap(a, dt), _snap(b, dt)) for a, b in seq.pump_windows]
    if gap_skip:
        regions = _merged_index_intervals(seq, dt, n_total)
    else:
        regions = [(0, n_total)]

    # per-shot dissipation state
    if tls is not None:
        n_filt = np.zeros(w)
        q_i = np.full(w, q_i_of_nbar(0.0, tls))
        gamma = op.omega0 / q_i
        gamma_bar = 0.5 * (op.kappa + gamma)
    else:
        gamma_bar = np.full(w, gb0)

    thr_sq = amp_threshold**2 if amp_threshold is not None else None
    max_n = np.zeros(w)
    click_step = np.full(w, -1, dtype=np.int64)

    record = record_stride > 0
    if record:
        rec_t: list[float] = []
        rec_x: list[np.ndarray] = []
        rec_y: list[np.ndarray] = []
        rec_q: list[np.ndarray] = []

    rt_kappa = math.sqrt(op.kappa)
    cos_off = np.cos(offsets)
    sin_off = np.sin(offsets)
    rotate = draw_phase_offsets or phase_offsets is not None

    def check_sample(k: int, in_window: bool, n_now: np.ndarray) -> None:
        if in_window:
            np.maximum(max_n, n_now, out=max_n)
            if thr_sq is not None:
                hit = (n_now > thr_sq) & (click_step < 0)
                if hit.any():
                    click_step[hit] = k

    def record_sample(k: int) -> None:
        rec_t.append(k * dt)
        rec_x.append(x.copy())
        rec_y.append(y.copy())
        if tls is not None:
            rec_q.append(q_i.copy())
        else:
            rec_q.append(np.full(w, op.q_i))

    def window_mask(a: int, b: int) -> np.ndarray:
        m = np.zeros(b - a + 1, dtype=bool)
        for w0, w1 in windows_idx:
            lo, hi = max(w0, a), min(w1, b + 1)
            if hi > lo:
                m[lo - a : hi - a] = True
        return m

    def apply_gap(n_steps: int) -> None:
        # exact OU transition over an undriven, pump-off stretch
        nonlocal gamma_bar
        dt_gap = n_steps * dt
        decay = np.exp(-gamma_bar * dt_gap)
        x[:] *= decay
        y[:] *= decay
        if not noise.off:
            var_st = 0.5 * noise.rate * noise.scale * (1.0 - decay**2)
            std = np.sqrt(var_st)
            for i, g in enumerate(gens):
                xi = g.standard_normal(2)
                x[i] += std[i] * xi[0]
                y[i] += std[i] * xi[1]
        if tls is not None:
            n_filt[:] *= math.exp(-dt_gap / tau_tls)
            q_i[:] = q_i_of_nbar(n_filt, tls)
            gamma = op.omega0 / q_i
            gamma_bar = 0.5 * (op.kappa + gamma)

    cursor = 0
    noise_buf = np.empty((w, _CHUNK, 2))

    for reg_a, reg_b in regions:
        if reg_a > cursor:
            apply_gap(reg_a - cursor)
        cursor = reg_a
        in_win = window_mask(reg_a, reg_b)
        reg_len = reg_b - reg_a

        # span boundaries: pump and drive edges inside the region
        edges = {reg_a, reg_b}
        for w0, w1 in windows_idx:
            for e in (w0, w1):
                if reg_a < e < reg_b:
                    edges.add(e)
        for d in seq.drives:
            for e in (_snap(d.t_start, dt), _snap(d.t_end, dt)):
                if reg_a < e < reg_b:
                    edges.add(e)
        edges = sorted(edges)

        buf_fill = 0  # steps consumed of the current noise buffer
        buf_len = 0

        n_now = x**2 + y**2
        check_sample(reg_a, bool(in_win[0]), n_now)

        for span_a, span_b in zip(edges[:-1], edges[1:]):
            pump_on = any(w0 <= span_a < w1 for w0, w1 in windows_idx)
            zeta_eff = op.zeta_mag if pump_on else 0.0
            delta_eff = op.delta_big if pump_on else op.delta_big - op.delta_p
            active = [
                d
                for d in seq.drives
                if _snap(d.t_start, dt) <= span_a < _snap(d.t_end, dt)
            ]
            t_span = (np.arange(span_a, span_b) * dt) if active else None
            if active:
                c = np.zeros(span_b - span_a, dtype=complex)
                for d in active:
                    c += d.value(t_span)
                drive_re = rt_kappa * c.real
                drive_im = rt_kappa * c.imag

            for j, k in enumerate(range(span_a, span_b)):
                # n_now holds x^2+y^2 at sample k (maintained across spans)
                if tls is not None:
                    n_filt += (dt / tau_tls) * (n_now - n_filt)
                    q_i = q_i_of_nbar(n_filt, tls)
                    gamma_bar = 0.5 * (op.kappa + op.omega0 / q_i)

                if record and (k % record_stride == 0):
                    record_sample(k)

                kn = op.kerr * n_now
                dx = -gamma_bar * x + (zeta_eff - delta_eff - kn) * y
                dy = (zeta_eff + delta_eff + kn) * x - gamma_bar * y
                if active:
                    if rotate:
                        dx = dx + (drive_re[j] * cos_off - drive_im[j] * sin_off)
                        dy = dy - (drive_re[j] * sin_off + drive_im[j] * cos_off)
                    else:
                        dx = dx + drive_re[j]
                        dy = dy - drive_im[j]
                x += dt * dx
                y += dt * dy

                if not noise.off:
                    if buf_fill >= buf_len:
                        buf_len = min(_CHUNK, reg_b - k)
                        for i, g in enumerate(gens):
                            noise_buf[i, :buf_len] = g.standard_normal((buf_len, 2))
                        buf_fill = 0
                    std = np.sqrt(noise.rate * noise.scale * gamma_bar * dt)
                    x += std * noise_buf[:, buf_fill, 0]
                    y += std * noise_buf[:, buf_fill, 1]
                    buf_fill += 1

                n_now = x**2 + y**2
                check_sample(k + 1, bool(in_win[k + 1 - reg_a]), n_now)

            if not (np.isfinite(x).all() and np.isfinite(y).all()):
                raise ArithmeticError(
                    f"integration diverged (NaN/inf) near t = {span_b * dt:.3e} s; "
                    "reduce dt or the drive strength"
                )

        cursor = reg_b

    if cursor < n_total:
        apply_gap(n_total - cursor)
        cursor = n_total

    if record:
        final_k = n_total
        if not rec_t or rec_t[-1] != final_k * dt:
            record_sample(final_k)

    t_click = np.where(click_step >= 0, click_step * dt, np.nan)
    q_i_final = (
        q_i.copy() if tls is not None else np.full(w, op.q_i, dtype=float)
    )

    trajectories = None
    if record:
        t_arr = np.array(rec_t)
        xs = np.stack(rec_x, axis=1)  # (w, n_rec)
        ys = np.stack(rec_y, axis=1)
        qs = np.stack(rec_q, axis=1)
        trajectories = [
            QuadratureTrajectory(
                dt=dt,
                t=t_arr.copy(),
                x=xs[i].copy(),
                y=ys[i].copy(),
                q_i_track=qs[i].copy(),
                rng_seed=int(seeds[i]),
            )
            for i in range(w)
        ]

    return EnsembleResult(
        seeds=seeds,
        final_x=x.copy(),
        final_y=y.copy(),
        max_amp=np.sqrt(max_n),
        t_click=t_click,
        q_i_final=q_i_final,
        phase_offsets=offsets,
        trajectories=trajectories,
    )


def integrate(
    seq,
    op: OperatingPoint,
    *,
    dt: float = 1e-9,
    seed: int = 0,
    noise: NoiseConfig | None = None,
    tls: TlsModel | None = None,
    tau_tls: float = 1e-6,
    initial_state=(0.0, 0.0),
    record_stride: int = 1,
    amp_threshold: float | None = None,
) -> QuadratureTrajectory:
    """Integrate a single seeded shot and return its sampled trajectory.

    Thin wrapper over :func:`integrate_ensemble` with one shot, full-rate
    recording by default and no gap skipping, so the samples cover the whole
    sequence on the regular grid t = k dt.
    """
    if record_stride < 1:
        raise ValueError("integrate() records its trajectory; record_stride >= 1")
    res = integrate_ensemble(
        seq,
        op,
        dt=dt,
        seeds=[seed],
        noise=noise,
        tls=tls,
        tau_tls=tau_tls,
        initial_states=np.asarray(initial_state, float).reshape(1, 2),
        amp_threshold=amp_threshold,
        record_stride=record_stride,
        gap_skip=False,
    )
    assert res.trajectories is not None
    return res.trajectories[0]


@dataclass
class _BareSequence:
    """Minimal sequence: pump on for the whole duration, optional drives."""

    total_duration: float
    pump_windows: list = field(default_factory=list)
    drives: list = field(default_factory=list)


def constant_pump_sequence(duration: float, drives=()) -> _BareSequence:
    """Pump-on-everywhere sequence, for steady-state and sweep work."""
    return _BareSequence(
        total_duration=duration,
        pump_windows=[(0.0, duration)],
        drives=list(drives),
    )


def hysteresis_sweep(
    dev,
    i_dc: float,
    p_grid,
    *,
    omega_pump: float | None = None,
    dt: float = 2e-9,
    settle_time: float = 40e-6,
    noise: NoiseConfig | None = None,
    tau_tls: float = 1e-6,
    n_osc_threshold: float = N_OSC_THRESHOLD,
    seed: int = 0,
) -> tuple[float, float]:
    """Pump-power up/down sweep with state carried between steps.

    At each grid power the oscillator (with TLS feedback) integrates for
    ``settle_time`` starting from the final state of the previous step, and
    is classified oscillating when the final photon number exceeds
    ``n_osc_threshold``. Returns (p_up, p_down): the lowest power that
    oscillates on the ascending sweep and the lowest power that still
    oscillates on the descending sweep. TLS saturation keeps the oscillating
    branch alive below the onset power, so p_down <= p_up; with saturation
    disabled the two coincide to within one grid step.
    """
    from .device import omega0_of_idc

    p_grid = np.asarray(sorted(p_grid), dtype=float)
    if p_grid.size < 3:
        raise ValueError("power grid needs at least 3 points")
    if omega_pump is None:
        omega_pump = 2.0 * omega0_of_idc(i_dc, dev)
    if noise is None:
        noise = NoiseConfig()
    seq = constant_pump_sequence(settle_time)

    def classify_path(powers, tag):
        state = np.zeros((1, 2))
        n_filt_qi = None  # (q_i carried implicitly via op rederive each step)
        osc = []
        for j, p in enumerate(powers):
            op = OperatingPoint.derive(dev, i_dc, float(p), omega_pump, 0.0)
            res = integrate_ensemble(
                seq,
                op,
                dt=dt,
                seeds=[derive_shot_seed(seed, (tag << 32) | j)],
                noise=noise,
                tls=dev.tls,
                tau_tls=tau_tls,
                initial_states=state,
                gap_skip=False,
            )
            state = np.column_stack([res.final_x, res.final_y])
            osc.append(float(res.final_x[0] ** 2 + res.final_y[0] ** 2) > n_osc_threshold)
        return np.array(osc)

    osc_up = classify_path(p_grid, 0)
    if not osc_up.any() or osc_up[0]:
        raise ValueError("no quiet-to-oscillating transition inside the power grid")
    p_up = float(p_grid[np.argmax(osc_up)])

    osc_dn = classify_path(p_grid[::-1], 1)[::-1]
    if not osc_dn.any():
        raise ValueError("descending sweep never oscillates; widen the grid")
    p_down = float(p_grid[np.argmax(osc_dn)])
    return p_up, p_down


def write_trajectory_csv(path, traj: QuadratureTrajectory, header_lines=()) -> None:
    """Export a trajectory as CSV (t_s, x, y, nbar, q_i_eff)."""
    import csv as _csv

    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = _csv.writer(fh)
        writer.writerow(["t_s", "x", "y", "nbar", "q_i_eff"])
        nbar = traj.nbar
        for i in range(len(traj)):
            writer.writerow(
                [
                    repr(float(traj.t[i])),
                    repr(float(traj.x[i])),
                    repr(float(traj.y[i])),
                    repr(float(nbar[i])),
                    repr(float(traj.q_i_track[i])),
                ]
            )
