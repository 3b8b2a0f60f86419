"""Speaker-detection evaluation platform.

Trial-set modeling, submission validation, actual/minimum detection costs
with condition-set equalization, DET analysis, bootstrap confidence
intervals, a Gaussian PLDA embedding backend, a synthetic-population
generator, and a leaderboard service.
"""

__version__ = "0.1.0"

from .metrics import CostParams, CostResult, DEFAULT_PARAMS  # noqa: F401
from .trialset import ConditionCell, TrialSetManifest, load_trials  # noqa: F401
