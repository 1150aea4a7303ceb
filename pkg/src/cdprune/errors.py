"""Exception hierarchy.

Every error carries a stable ``code`` string, which the CLI reports as
``{"error": code, "message": ...}``.
"""


class CDPruneError(Exception):
    code = "Error"
    exit_code = 2

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message


class RowNormUnderflow(CDPruneError):
    code = "RowNormUnderflow"

    def __init__(self, index, norm=0.0):
        super().__init__(f"row {index} has norm {norm:.3g} <= 1e-12")
        self.index = index
        self.norm = norm


class NonFiniteValue(CDPruneError):
    code = "NonFiniteValue"


class DimensionMismatch(CDPruneError):
    code = "DimensionMismatch"


class EmptyQuerySet(CDPruneError):
    code = "EmptyQuerySet"


class InvalidTheta(CDPruneError):
    code = "InvalidTheta"


class InvalidRelevance(CDPruneError):
    code = "InvalidRelevance"


class IndexOutOfRange(CDPruneError, IndexError):
    code = "IndexOutOfRange"


class BudgetOutOfRange(CDPruneError):
    code = "BudgetOutOfRange"


class InstanceTooLarge(CDPruneError):
    code = "InstanceTooLarge"


class SingularSubmatrix(CDPruneError):
    code = "SingularSubmatrix"


class RankDeficient(CDPruneError):
    code = "RankDeficient"
    exit_code = 3


class BadMagic(CDPruneError):
    code = "BadMagic"


class TruncatedPayload(CDPruneError):
    code = "TruncatedPayload"


class NonRectangularCsv(CDPruneError):
    code = "NonRectangularCsv"


class GridMismatch(CDPruneError):
    code = "GridMismatch"


class InvalidSpec(CDPruneError):
    code = "InvalidSpec"


class InvalidRequest(CDPruneError):
    code = "InvalidRequest"
