"""
Curation Errors
===============

Every error raised by the curation engine derives from ``CurationError``.
Management commands map ``exit_code`` onto the process exit status:
2 for validation/input failures, 3 for solver non-convergence.
"""


class CurationError(Exception):
    """Base class for all curation errors."""

    exit_code = 2


class ConfigurationError(CurationError):
    pass


class ValidationFailed(CurationError):
    """Raised when a problem fails validation; carries the full report."""

    def __init__(self, report):
        self.report = report
        super().__init__('; '.join(report.issues) or 'validation failed')


class BagFileError(CurationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class UndefinedDistance(CurationError):
    def __init__(self, term):
        self.term = term
        super().__init__(f'undefined distance: zero page count for {term!r}')


class DegenerateDenominator(CurationError):
    pass


class InsufficientImages(CurationError):
    pass


class DegenerateData(CurationError):
    pass


class NumericError(CurationError):
    pass


class KernelStateError(CurationError):
    pass


class InputError(CurationError):
    pass


class CardinalityError(CurationError):
    pass


class DomainError(CurationError):
    pass


class EnumerationTooLarge(CurationError):
    pass


class InfeasibleLabeling(CurationError):
    pass


class CalibrationError(CurationError):
    pass


class QuotaError(CurationError):
    pass


class SchemaError(CurationError):
    pass


class SchemaVersionError(SchemaError):
    pass


class ModelNotFound(CurationError):
    pass


class SolverNonConvergence(CurationError):
    exit_code = 3


class StageError(CurationError):
    """Wraps a sub-stage failure of the curation pipeline with the stage name."""

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        self.exit_code = getattr(error, 'exit_code', 2)
        super().__init__(f'{stage}: {error}')
