"""Quantum thermodynamics of driven systems at arbitrary system-bath coupling.

The coupled Hamiltonian is unitarily equivalent to an uncoupled one,
``H(t) = e^{igG} (H_s(t) (x) I + I (x) H_b) e^{-igG}``; the modules build the
two concrete models, propagate them, account work/heat/entropy along a
protocol and verify the work fluctuation theorems.
"""

from __future__ import annotations

from .models import (
    OscillatorModel,
    OscillatorModelParams,
    SpinModel,
    SpinModelParams,
    make_model,
)
from .thermo import ThermoConfig, ThermoSeries, gibbs, run_protocol

__version__ = "0.1.0"

__all__ = [
    "OscillatorModel",
    "OscillatorModelParams",
    "SpinModel",
    "SpinModelParams",
    "ThermoConfig",
    "ThermoSeries",
    "gibbs",
    "make_model",
    "run_protocol",
]
