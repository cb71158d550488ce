"""Exception taxonomy for the geofair package.

Every error raised on purpose by this package derives from GeofairError, so
the CLI can map "expected" failures to exit code 2 and keep exit code 3 for
genuine bugs.
"""


class GeofairError(Exception):
    """Base class for all errors raised by geofair."""


class SchemaMismatch(GeofairError):
    """CSV header does not match the required schema exactly."""


class RowInvalid(GeofairError):
    """A CSV row violates a field invariant (strict ingestion only)."""

    def __init__(self, line: int, field: str, message: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}, field '{field}': {message}")


class EmptyDataset(GeofairError):
    """No valid rows survived ingestion, or a Dataset would be empty."""


class InvalidConfig(GeofairError):
    """A configuration object violates its invariants."""


class SingleState(GeofairError):
    """Spatial split needs at least two distinct states."""


class TooFewStates(GeofairError):
    """Fewer training states than requested folds."""


class RankDeficient(GeofairError):
    """Collinear design matrix; OLS coefficients are not identified."""


class InsufficientData(GeofairError):
    """Not enough usable rows to fit the requested model."""


class ConstantTarget(GeofairError):
    """R-squared is undefined for a constant target vector."""


class AllTreatment(GeofairError):
    """Group assignment left the control side empty."""


class AllControl(GeofairError):
    """Group assignment left the treatment side empty."""


class MissingFeature(GeofairError):
    """A village lacks a feature required for matching."""

    def __init__(self, village_id: str, feature: str):
        self.village_id = village_id
        self.feature = feature
        super().__init__(f"village '{village_id}' is missing match feature '{feature}'")


class MissingTarget(GeofairError):
    """A village lacks the target value needed for residuals."""


class TrainTestOverlap(GeofairError):
    """Audited villages fall in states the model was trained on."""

    def __init__(self, states):
        self.states = sorted(states)
        super().__init__(
            "audit refused: villages from model training states would be audited: "
            + ", ".join(self.states)
        )
