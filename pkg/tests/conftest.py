"""Shared fixtures: a paper-like device and frequently used operating points."""

import math

import pytest

from kipo.device import DeviceParams, TlsModel

TWO_PI = 2.0 * math.pi


@pytest.fixture
def device():
    """Reference-like device: 7.776 GHz at zero bias, TLS-limited Q_i."""
    return DeviceParams(
        omega0_zero=TWO_PI * 7.776e9,
        i_star=21.5e-3,
        q_c=220e3,
        tls=TlsModel(q_i_floor=4.7e3, q_i_ceiling=29e3, n_critical=1.0, exponent=0.5),
        z_p=33.0,
        alpha_p=1.3,
        l_total=2e-9,
    )


@pytest.fixture
def device_fixed_qi():
    """Same device with TLS saturation disabled (constant Q_i)."""
    return DeviceParams(
        omega0_zero=TWO_PI * 7.776e9,
        i_star=21.5e-3,
        q_c=220e3,
        tls=TlsModel(q_i_floor=18e3, q_i_ceiling=18e3),
        z_p=33.0,
        alpha_p=1.3,
        l_total=2e-9,
    )
