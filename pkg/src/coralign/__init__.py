"""Correlation alignment for unsupervised domain adaptation.

Aligns second-order statistics (feature covariances) between a labeled
source domain and an unlabeled target domain, so that classifiers
trained on source features transfer better.  Three forms are provided:

* a linear feature-space transform (regularized or analytical),
* a weight-space variant for linear discriminant classifiers,
* a differentiable covariance-distance loss for joint training of a
  small feedforward network.

A synthetic domain-shift benchmark harness and a CLI tie the pieces
together.
"""

__version__ = "0.1.0"

from .errors import (
    CoralignError,
    FormatError,
    InvalidInputError,
    NotPSDError,
    NumericalError,
)

__all__ = [
    "CoralignError",
    "InvalidInputError",
    "FormatError",
    "NumericalError",
    "NotPSDError",
    "__version__",
]
