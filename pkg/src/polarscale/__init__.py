"""Polar codes over the binary erasure channel: construction, exact and
Monte Carlo decoding analysis, closed-form bounds, and list-size scaling.

Submodules are imported explicitly (``from polarscale import polar``); the
heavyweight Monte Carlo harness is only loaded on demand.
"""

__version__ = "0.1.0"
