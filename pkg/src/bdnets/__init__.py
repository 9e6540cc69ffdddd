"""Retractional bases for quantized nets in Bourgain-Delbaen spaces.

Everything is computed at a finite truncation stage in exact rational
arithmetic: the quantized blocks M_n, C_n, D_n, the one-point retractions
that build a retractional basis on M, the perturbation onto a net N, and
the linearized projections on the Lipschitz-free space.
"""

from bdnets.linf import QVec, StageChain
from bdnets.system import BDSystem, build_system

__all__ = ["QVec", "StageChain", "BDSystem", "build_system"]
__version__ = "0.1.0"
