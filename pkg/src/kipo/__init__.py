"""Kinetic-inductance parametric oscillator: latched click-detector toolkit.

Subpackages cover the pumped-Duffing quadrature dynamics, the analytic
self-oscillation threshold, Monte-Carlo detection protocols, detector
statistics, and one-port reflection fitting. See the README for the CLI.
"""

__version__ = "0.1.0"

from .device import (
    DeviceParams,
    OperatingPoint,
    TlsModel,
    dbm_to_watts,
    watts_to_dbm,
)

__all__ = [
    "DeviceParams",
    "OperatingPoint",
    "TlsModel",
    "dbm_to_watts",
    "watts_to_dbm",
    "__version__",
]
