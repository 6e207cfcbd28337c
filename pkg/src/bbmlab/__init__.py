"""bbmlab: Monte Carlo laboratory for branching Brownian motion.

Free, confined (killed at an expanding ball), and mild-obstacle BBM,
with the closed-form laws they should obey and a deterministic
replication harness for estimating large-deviation rates and quenched
growth exponents at desk scale.
"""

__version__ = "0.1.0"
