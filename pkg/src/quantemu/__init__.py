"""quantemu: quantile-network surrogates with a Gaussian-process baseline.

Public surface:
    iqn        quantile-network configs, training, predictive sampling
    ensemble   seed-diverse and randomized-prior ensembles
    boundary   mixture labeling, boundary classifier, augmented pipeline
    gp         stationary Matern-5/2 kriging baseline
    metrics    CRPS / RMSE / RMSPE / coverage and a shared evaluate()
    benchmarks synthetic generators, CSV ingestion, splits
    active     acquisition scores and the active-learning loop
    serialize  model container save/load
    cli        command-line entry point
"""

__version__ = "0.1.0"

from . import exceptions  # noqa: F401
from .rng import SeededRng, replicate_rng  # noqa: F401
