"""Domain adaptation when one outcome/attribute cell is never observed.

The compiled extension carries all the logic; this package only re-exports
its public names.
"""

from ._subpop import (
    Dataset,
    Error,
    Model,
    ProbModel,
    accuracy,
    experiment,
    f1,
    fit,
    fit_logistic,
    partition,
    risk_report,
    simulate,
)

__all__ = [
    "Dataset",
    "Error",
    "Model",
    "ProbModel",
    "accuracy",
    "experiment",
    "f1",
    "fit",
    "fit_logistic",
    "partition",
    "risk_report",
    "simulate",
]
