"""Desk-scale model of a cryogenic CMOS quantum-controller chip.

Submodules: ``patgen`` (pattern memory assembler and executor), ``pulsegen``
(phase generator and pulse select), ``analog`` (switched-capacitor circuits),
``noise`` (sampled-data noise budgets), ``detector`` (read-out chain),
``thermal`` (cryostat heat load), ``qexp`` (tunnelling Monte Carlo) and
``cli``.
"""
from . import analog, detector, noise, patgen, pulsegen, qexp, thermal

__version__ = "0.1.0"

__all__ = ["analog", "detector", "noise", "patgen", "pulsegen", "qexp", "thermal", "__version__"]
