"""Exception types raised across the package.

Every error carries a short machine-readable ``code`` so the CLI can emit
a JSON error record without string matching.
"""


class MfspecError(Exception):
    code = "error"


class NotPrimitive(MfspecError):
    code = "not_primitive"


class InadmissibleWord(MfspecError):
    code = "inadmissible_word"


class GraphTooLarge(MfspecError):
    code = "graph_too_large"


class BudgetExceeded(MfspecError):
    code = "budget_exceeded"


class WindowMismatch(MfspecError):
    code = "window_mismatch"


class Infeasible(MfspecError):
    code = "infeasible"


class DualPrimalGap(MfspecError):
    code = "dual_primal_gap"


class EmptyIntersection(MfspecError):
    code = "empty_intersection"


class UnknownCatalogEntry(MfspecError):
    code = "unknown_catalog_entry"


class ConvergenceError(MfspecError):
    code = "convergence"


class ModelError(MfspecError):
    """A model file or parameter violates its documented contract."""

    code = "model_error"
