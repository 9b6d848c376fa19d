"""Simulation and verification toolkit for height processes of continuous-state branching processes.

Modules
-------
mechanism
    Branching mechanisms, jump measures, truncation schedules, offspring laws.
levy_sim
    Truncated spectrally positive Levy paths on an event-driven skeleton.
height
    Height process from a Levy path (monotone-stack evaluator and oracles).
approx
    Poisson-sampled discrete height process ``H^N`` and ``K_N``.
gw_pop
    Continuous-time Galton-Watson population in mass units.
stats
    KS tests, LLN and sup-norm trend reports.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
