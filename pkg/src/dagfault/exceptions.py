"""Exception and warning types raised across the package."""


class DagfaultError(Exception):
    """Base class for all package errors."""


# -- data ------------------------------------------------------------------

class DataError(DagfaultError):
    """Input data could not be ingested or split."""


class MissingColumn(DataError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"missing column {self.name!r}"


class EmptyDataset(DataError, ValueError):
    pass


class LabelOutOfRange(DataError, ValueError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: label {value!r} outside 0..20")
        self.row = row
        self.value = value


class ClassTooSmall(DataError, ValueError):
    def __init__(self, cls, count, needed):
        super().__init__(f"class {cls} has {count} samples, needs at least {needed}")
        self.cls = cls
        self.count = count
        self.needed = needed


# -- resampling ------------------------------------------------------------

class TooFewSamples(DagfaultError, ValueError):
    def __init__(self, cls, needed, count=None):
        msg = f"class {cls} needs more than {needed} samples"
        if count is not None:
            msg += f" (has {count})"
        super().__init__(msg)
        self.cls = cls
        self.needed = needed


class TargetExceedsCount(DagfaultError, ValueError):
    pass


# -- classifiers -----------------------------------------------------------

class SingleClassTrainingSet(DagfaultError, ValueError):
    pass


class NonFiniteLoss(DagfaultError, FloatingPointError):
    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class WidthMismatch(DagfaultError, ValueError):
    def __init__(self, expected, got):
        super().__init__(f"expected {expected} columns, got {got}")
        self.expected = expected
        self.got = got


class ModelFormatError(DagfaultError, ValueError):
    pass


# -- evaluation ------------------------------------------------------------

class UnknownLabel(DagfaultError, ValueError):
    pass


class ScoresMissingForAUC(DagfaultError, ValueError):
    pass


class MetricWarning(UserWarning):
    """A per-class metric term had a zero denominator and was set to 0."""


# -- attribution -----------------------------------------------------------

class EmptyBackground(DagfaultError, ValueError):
    pass


class BudgetTooSmall(DagfaultError, ValueError):
    def __init__(self, budget, needed):
        super().__init__(f"coalition budget {budget} < {needed}")
        self.budget = budget
        self.needed = needed


class MTooLarge(DagfaultError, ValueError):
    pass


# -- causal ----------------------------------------------------------------

class CITooFewSamples(DagfaultError, ValueError):
    pass


class SingularSubmatrixWarning(RuntimeWarning):
    """Correlation submatrix was singular; a ridge term was added."""


class IcaNonConvergence(DagfaultError, RuntimeError):
    pass


class GaussianDegeneracy(UserWarning):
    """Residuals look Gaussian; LiNGAM orientation is unreliable."""


class Nonconvergence(DagfaultError, RuntimeError):
    def __init__(self, h, W=None):
        super().__init__(f"acyclicity residual {h:.3e} above tolerance")
        self.h = h
        self.W = W


class CyclicAfterThreshold(UserWarning):
    """Thresholded weights still had a cycle; the cut was raised."""


class GraphError(DagfaultError, ValueError):
    pass


class VertexSetMismatch(GraphError):
    pass


# -- pipeline --------------------------------------------------------------

class ConfigInvalid(DagfaultError, ValueError):
    def __init__(self, details, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + details)
        self.details = details
        self.line = line


class StageFailed(DagfaultError, RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class IoError(DagfaultError, OSError):
    """An output artifact could not be written."""
