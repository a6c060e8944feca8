"""Metaphorical polysemy detection over lexicon sense inventories.

Subpackages and modules: ``lexicon`` (sense inventories), ``corpora``
(token-level datasets), ``embedstore`` (frozen vector files), ``engine``
(gradient tape, MLPs, AdamW, checkpoints), ``models`` (scoring
architectures), ``training`` (losses, two-phase protocol, search),
``evaluation`` (metrics and significance), ``synthetic`` (planted
benchmarks), ``cli`` (command-line entry point).
"""

__version__ = "0.1.0"
