"""Loop-erased random walk on discrete tori and complete graphs.

Samplers, exact small-graph oracles and estimators for the mean-field
behaviour of loop-erased random walk on the torus Z^d / (N Z)^d.
"""

__version__ = "0.1.0"

RNG_ALGORITHM = "numpy-philox4x64/seedsequence-spawnkey"
