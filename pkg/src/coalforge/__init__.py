"""Simulation and numerical verification toolkit for a binary-tree-pruning
coalescent, a generic multiple-merger coalescent simulator, and the matching
continuum-tree pruning process.

Subpackages
-----------
specfun     exact rates, counting constants, generating functions, quadrature
treecore    labelled ordered binary trees: sampling, enumeration, surgery
prunesim    the tree-pruning coalescent chain with event logging
lambdasim   rate-table driven multiple-merger jump chain (independent oracle)
crtsim      reduced continuum trees, Poisson mark pruning, dust process
stats       goodness-of-fit statistics (KS, chi-square)
experiments seeded Monte-Carlo experiments and the verification suite
"""

__version__ = "0.1.0"

from . import specfun, treecore, prunesim, lambdasim, crtsim, stats, rng, experiments

__all__ = [
    "specfun",
    "treecore",
    "prunesim",
    "lambdasim",
    "crtsim",
    "stats",
    "rng",
    "experiments",
    "__version__",
]
