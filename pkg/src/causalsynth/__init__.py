"""Structurally valid synthetic data from discrete structural causal models.

The package samples causal skeletons (value + retained noise) from
discrete SCMs, realizes them as documents through a pluggable
language channel with verify-and-repair feedback, supports
interventional and counterfactual generation by noise replay, and
evaluates structural fidelity of the result.
"""

from ._kernels import backend_name
from .errors import CausalSynthError
from .graph import (
    Dag,
    d_separated,
    descendants,
    enumerate_d_separations,
    mutilate,
    shd,
    topological_sort,
)
from .scm import (
    Scm,
    Skeleton,
    Variable,
    counterfactual,
    intervene,
    mechanism,
    replay,
    sample_dataset,
    sample_skeleton,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "CausalSynthError",
    "Dag",
    "Scm",
    "Skeleton",
    "Variable",
    "backend_name",
    "counterfactual",
    "d_separated",
    "descendants",
    "enumerate_d_separations",
    "intervene",
    "mechanism",
    "mutilate",
    "replay",
    "sample_dataset",
    "sample_skeleton",
    "shd",
    "topological_sort",
    "validate",
]
