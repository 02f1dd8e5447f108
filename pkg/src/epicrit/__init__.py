"""Critical stochastic epidemics, their branching envelopes and scaling limits.

Modules
-------
sampling   reproducible streams and exact binomial / subset samplers
meanfield  SIS and SIR chains, the Galton-Watson envelope, the red/blue coupling
spatial    SIS-d / SIR-d on Z^d, the branching random walk, density rescaling
diffusion  Feller, SIS and SIR limit diffusions and first-passage times
spde       Dawson-Watanabe density with killing on a grid
stats      empirical distributions and two-sample KS comparisons
"""

__version__ = "0.1.0"

from .sampling import derive_stream  # noqa: E402

__all__ = ["__version__", "derive_stream"]
