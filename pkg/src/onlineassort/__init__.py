"""Online assortment planning under multinomial-logit demand with resource constraints."""

__version__ = "0.1.0"

from .instance import Instance, PublicView
from .mnl import (
    AssortmentFamily,
    UtilityVector,
    choice_prob,
    choice_probs,
    expected_consumption,
    expected_revenue,
    sample_purchase,
)
from .policies import OnlineTau, StaticOracle, UCBPolicy, UniformRandom
from .simulator import RunLog, generate_instance, run_episode

__all__ = [
    "AssortmentFamily",
    "Instance",
    "OnlineTau",
    "PublicView",
    "RunLog",
    "StaticOracle",
    "UCBPolicy",
    "UniformRandom",
    "UtilityVector",
    "choice_prob",
    "choice_probs",
    "expected_consumption",
    "expected_revenue",
    "generate_instance",
    "run_episode",
    "sample_purchase",
]
