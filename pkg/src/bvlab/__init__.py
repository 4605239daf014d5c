"""Vanishing-viscosity analysis of multi-rate rate-independent systems.

Viscous potentials and asymmetric l1 rate potentials, contact potentials and
joint B-functions, a minimizing-movement solver for the viscous system, the
energy-dissipation arclength reparametrisation, and the jump / regime
analysis of the limit curves.
"""
from .potentials import *  # noqa: F401,F403
from .contact import *  # noqa: F401,F403
from .energy import *  # noqa: F401,F403
from .viscous import *  # noqa: F401,F403
from .rescale import *  # noqa: F401,F403
from .bv import *  # noqa: F401,F403
from . import builtins  # noqa: F401
from .experiment import ConfigError, ExperimentConfig, analyze_artifacts, emit_plotdata, run_experiment  # noqa: F401

__version__ = "0.1.0"
