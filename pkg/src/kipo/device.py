"""Device constants and the bias/pump-derived oscillator parameters.

All internal quantities use SI units with angular frequencies in rad/s.
Powers cross the API boundary in watts; use :func:`dbm_to_watts` /
:func:`watts_to_dbm` at the edges (config files carry dBm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.constants import hbar

__all__ = [
    "DeviceParams",
    "TlsModel",
    "OperatingPoint",
    "dbm_to_watts",
    "watts_to_dbm",
    "delta_dc",
    "delta_p",
    "kerr",
    "zeta",
    "omega0_of_idc",
    "q_i_of_nbar",
    "nbar_from_power",
]


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    """Convert a power in watts to dBm. Rejects non-positive powers."""
    if p_watts <= 0.0:
        raise ValueError(f"power must be positive to express in dBm, got {p_watts}")
    return 10.0 * math.log10(p_watts) + 30.0


@dataclass(frozen=True)
class TlsModel:
    """Phenomenological power saturation of the internal quality factor.

    Photons stored in the resonator saturate two-level systems at the
    dielectric interfaces, raising Q_i from ``q_i_floor`` (unsaturated) to
    ``q_i_ceiling`` (fully saturated):

        1/Q_i(n) = (1/q_i_floor - 1/q_i_ceiling) / (1 + n/n_critical)**exponent
                   + 1/q_i_ceiling

    ``exponent`` defaults to the conventional TLS saturation value 0.5.
    Setting ``q_i_floor == q_i_ceiling`` disables the power dependence.
    """

    q_i_floor: float
    q_i_ceiling: float
    n_critical: float = 1.0
    exponent: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 < self.q_i_floor <= self.q_i_ceiling):
            raise ValueError(
                f"require 0 < q_i_floor <= q_i_ceiling, got "
                f"{self.q_i_floor}, {self.q_i_ceiling}"
            )
        if self.n_critical <= 0.0 or self.exponent <= 0.0:
            raise ValueError("n_critical and exponent must be positive")


@dataclass(frozen=True)
class DeviceParams:
    """Static constants of one device.

    Parameters
    ----------
    omega0_zero:
        Resonance angular frequency at zero DC bias (rad/s).
    i_star:
        Nonlinearity scale current (A); sets the strength of every
        current-induced frequency shift and of three-wave mixing.
    q_c:
        Coupling quality factor of the single measurement port.
    tls:
        Saturation model for the internal quality factor.
    z_p:
        Device impedance at the pump frequency (ohm), used to convert pump
        power to pump current via I_p**2 = 2 P_p / Z_p.
    alpha_p:
        Pump-transmission ripple factor (dimensionless >= 1 typical); the
        effective impedance seen by the pump is alpha_p * z_p.
    l_total:
        Total inductance (H), entering only the Kerr rate. Not quoted for
        the reference device; must be supplied by the user.
    """

    omega0_zero: float
    i_star: float
    q_c: float
    tls: TlsModel
    z_p: float = 33.0
    alpha_p: float = 1.3
    l_total: float = 2e-9

    def __post_init__(self) -> None:
        for name in ("omega0_zero", "i_star", "q_c", "z_p", "alpha_p", "l_total"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


def delta_dc(i_dc: float, dev: DeviceParams) -> float:
    """DC-bias frequency shift: -(1/2) (I_DC/I*)^2 omega0 (rad/s, <= 0)."""
    return -0.5 * (i_dc / dev.i_star) ** 2 * dev.omega0_zero


def delta_p(p_pump: float, dev: DeviceParams) -> float:
    """Pump-induced frequency shift (rad/s, <= 0).

    Uses -(1/8) (I_p/I*)^2 omega0 with the pump current amplitude obtained
    from the pump power via I_p^2 = 2 P_p / Z_p.
    """
    if p_pump < 0.0:
        raise ValueError("pump power must be >= 0")
    i_p_sq = 2.0 * p_pump / dev.z_p
    return -0.125 * (i_p_sq / dev.i_star**2) * dev.omega0_zero


def kerr(dev: DeviceParams) -> float:
    """Self-Kerr rate -(3/8) (hbar omega0 / (L_T I*^2)) omega0 (rad/s, < 0)."""
    return -0.375 * hbar * dev.omega0_zero**2 / (dev.l_total * dev.i_star**2)


def zeta(
    i_dc: float, p_pump: float, phi_pump: float, dev: DeviceParams
) -> tuple[float, float]:
    """Three-wave mixing strength as (magnitude rad/s, phase rad).

    Magnitude is (1/4) I_DC I_p / I*^2 * omega0 with I_p = sqrt(2 P_p/Z_p).
    The returned phase is -phi_pump: the physical coupling carries one extra
    global factor -1 = exp(i pi), absorbed here as a fixed pi offset of the
    pump-phase origin (see the unit test against the raw complex form).
    Every consumer in this package uses this one convention.
    """
    if i_dc < 0.0 or p_pump < 0.0:
        raise ValueError("i_dc and p_pump must be >= 0")
    i_p = math.sqrt(2.0 * p_pump / dev.z_p)
    mag = 0.25 * i_dc * i_p / dev.i_star**2 * dev.omega0_zero
    phase = math.remainder(-phi_pump, 2.0 * math.pi)
    return mag, phase


def omega0_of_idc(i_dc: float, dev: DeviceParams) -> float:
    """Biased resonance frequency omega0 (1 - I_DC^2 / 2 I*^2) in rad/s."""
    return dev.omega0_zero + delta_dc(i_dc, dev)


def q_i_of_nbar(nbar, tls: TlsModel):
    """Internal quality factor at average photon number ``nbar``.

    Monotone non-decreasing, bounded by [q_i_floor, q_i_ceiling]. Accepts
    scalars or numpy arrays.
    """
    inv_span = 1.0 / tls.q_i_floor - 1.0 / tls.q_i_ceiling
    inv_q = inv_span / (1.0 + nbar / tls.n_critical) ** tls.exponent
    return 1.0 / (inv_q + 1.0 / tls.q_i_ceiling)


def nbar_from_power(
    p0: float,
    omega0: float,
    q_i: float | TlsModel,
    q_c: float,
    rel_tol: float = 1e-9,
    max_iter: int = 1000,
) -> float:
    """Average intracavity photon number for input power ``p0`` (W).

    Implements n = 2 Q_L^2 P0 / (hbar omega0^2 Q_c) with
    Q_L = (1/Q_i + 1/Q_c)^-1.

    When ``q_i`` is a :class:`TlsModel` the equation is implicit (Q_i depends
    on n); it is then solved by damped fixed-point iteration (damping 0.5)
    to relative tolerance ``rel_tol``.
    """
    if p0 < 0.0 or omega0 <= 0.0 or q_c <= 0.0:
        raise ValueError("need p0 >= 0, omega0 > 0, q_c > 0")

    def n_of_qi(qi: float) -> float:
        q_l = 1.0 / (1.0 / qi + 1.0 / q_c)
        return 2.0 * q_l**2 * p0 / (hbar * omega0**2 * q_c)

    if not isinstance(q_i, TlsModel):
        if q_i <= 0.0:
            raise ValueError("q_i must be positive")
        return n_of_qi(q_i)

    n = 0.0
    for _ in range(max_iter):
        n_next = 0.5 * n + 0.5 * n_of_qi(q_i_of_nbar(n, q_i))
        if abs(n_next - n) <= rel_tol * max(abs(n_next), 1e-300):
            return n_next
        n = n_next
    raise ArithmeticError(
        f"photon-number fixed point did not converge in {max_iter} iterations"
    )


@dataclass(frozen=True)
class OperatingPoint:
    """One bias/pump configuration with its derived oscillator parameters.

    The derived fields are pure functions of (DeviceParams, bias fields,
    q_i); :meth:`derive` computes them and :meth:`rederive` recomputes for a
    new q_i, which is what the TLS feedback loop in the integrator does.

    Dynamics quantities (rad/s unless noted):

    - ``delta_big``  rotating-frame detuning Delta = omega0 + delta_dc +
      delta_p + kerr - omega_pump/2
    - ``zeta_mag``, ``zeta_phase``  three-wave mixing strength and phase
      (phase = -phi_pump, see :func:`zeta`)
    - ``kappa = omega0/Q_c``, ``gamma = omega0/Q_i``,
      ``gamma_bar = (kappa+gamma)/2``

    Instances may also be constructed directly from raw rates for synthetic
    dynamics tests; ``omega0`` and ``q_i`` are then only required if TLS
    feedback is used.
    """

    i_dc: float
    p_pump: float
    omega_pump: float
    phi_pump: float
    q_i: float
    omega0: float
    delta_dc: float
    delta_p: float
    kerr: float
    zeta_mag: float
    zeta_phase: float
    delta_big: float
    kappa: float
    gamma: float
    gamma_bar: float

    @classmethod
    def derive(
        cls,
        dev: DeviceParams,
        i_dc: float,
        p_pump: float,
        omega_pump: float,
        phi_pump: float = 0.0,
        q_i: float | None = None,
    ) -> "OperatingPoint":
        """Build an operating point from device constants and bias settings.

        ``q_i`` defaults to the unsaturated TLS value ``dev.tls.q_i_floor``.
        """
        if q_i is None:
            q_i = dev.tls.q_i_floor
        if q_i <= 0.0:
            raise ValueError("q_i must be positive")
        d_dc = delta_dc(i_dc, dev)
        d_p = delta_p(p_pump, dev)
        k = kerr(dev)
        z_mag, z_phase = zeta(i_dc, p_pump, phi_pump, dev)
        kappa = dev.omega0_zero / dev.q_c
        gamma = dev.omega0_zero / q_i
        return cls(
            i_dc=i_dc,
            p_pump=p_pump,
            omega_pump=omega_pump,
            phi_pump=phi_pump,
            q_i=q_i,
            omega0=dev.omega0_zero,
            delta_dc=d_dc,
            delta_p=d_p,
            kerr=k,
            zeta_mag=z_mag,
            zeta_phase=z_phase,
            delta_big=dev.omega0_zero + d_dc + d_p + k - 0.5 * omega_pump,
            kappa=kappa,
            gamma=gamma,
            gamma_bar=0.5 * (kappa + gamma),
        )

    @classmethod
    def from_rates(
        cls,
        delta_big: float,
        zeta_mag: float,
        kerr: float,
        kappa: float,
        gamma: float,
        zeta_phase: float = 0.0,
        omega0: float = math.nan,
        q_i: float = math.nan,
    ) -> "OperatingPoint":
        """Construct directly from dynamics rates (synthetic/test use)."""
        return cls(
            i_dc=math.nan,
            p_pump=math.nan,
            omega_pump=math.nan,
            phi_pump=-zeta_phase,
            q_i=q_i,
            omega0=omega0,
            delta_dc=math.nan,
            delta_p=0.0,
            kerr=kerr,
            zeta_mag=zeta_mag,
            zeta_phase=zeta_phase,
            delta_big=delta_big,
            kappa=kappa,
            gamma=gamma,
            gamma_bar=0.5 * (kappa + gamma),
        )

    def rederive(self, q_i: float) -> "OperatingPoint":
        """Return a copy with gamma, gamma_bar recomputed for a new q_i.

        delta_big does not depend on q_i and is left unchanged; recomputing
        with the same q_i is the identity.
        """
        if q_i <= 0.0:
            raise ValueError("q_i must be positive")
        if math.isnan(self.omega0):
            raise ValueError("operating point has no omega0; cannot rederive q_i")
        gamma = self.omega0 / q_i
        return replace(
            self, q_i=q_i, gamma=gamma, gamma_bar=0.5 * (self.kappa + gamma)
        )
