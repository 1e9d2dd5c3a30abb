"""Exception and warning types shared across the toolkit."""


class StatTriggerError(Exception):
    """Base class for all toolkit errors."""


class ZeroVariance(StatTriggerError):
    """Dataset is constant; standardization is undefined."""


class ZeroMean(StatTriggerError):
    """Variance-over-mean statistic requested on an image with |mean| ~ 0."""


class EmptyDataset(StatTriggerError):
    """Operation requires at least one item."""


class DegenerateThreshold(StatTriggerError):
    """Every statistic value is identical; a ratio cut would poison everything."""


class ActivationFailed(StatTriggerError):
    """Escalation exhausted without reaching the target statistic value."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class SuppressionFailed(StatTriggerError):
    """Escalation exhausted without pushing the statistic below the target."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class ZeroSigma(StatTriggerError):
    """Standardization trigger needs a strictly positive sigma."""


class InsufficientSample(StatTriggerError):
    """Distribution audit needs a minimum sample size."""


class WrongDomain(StatTriggerError):
    """Operation requires a different pixel value domain."""


class BadParameter(StatTriggerError):
    """Parameter outside its documented range."""


class OracleUnavailable(StatTriggerError):
    """Classifier oracle cannot be reached."""


class OracleTimeout(StatTriggerError):
    """Classifier oracle did not answer in time."""


class ShapeMismatch(StatTriggerError):
    """Oracle request/response shapes disagree or a frame is malformed."""


class CorruptRecord(StatTriggerError):
    """Serialized dataset bytes do not match the documented layout."""


class LabelOutOfRange(StatTriggerError):
    """Stored label exceeds the declared class count."""


class MissingStats(StatTriggerError):
    """De-standardization requested without stored (mu, sigma)."""


class TieWarning(UserWarning):
    """Threshold cut crossed tied statistic values; poisoned fraction overshoots."""


class BudgetUnmet(UserWarning):
    """Fewer qualifying target-label images than the poisoning budget."""
