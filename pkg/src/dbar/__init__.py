"""Online bandit controller selection for unknown dynamical systems.

A finite pool of candidate controllers drives a single trajectory of a
plant under bounded disturbances.  A batched adversarial-bandit policy
selects one controller per batch, permanently falsifies controllers that
violate a prescribed stability envelope, and adapts its learning rate to
the observed state-norm regime.
"""

__version__ = "0.1.0"
