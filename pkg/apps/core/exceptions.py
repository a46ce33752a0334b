"""Error kinds shared by every analysis module.

Views turn these into 400 responses, management commands into exit status 2.
"""


class AnalysisError(Exception):
    """Base class; ``code`` is the machine-readable error kind."""

    code = "analysis-error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def as_dict(self):
        payload = {"error": self.code, "detail": str(self)}
        if self.context:
            payload["context"] = self.context
        return payload


class InvalidParameter(AnalysisError):
    code = "invalid-parameter"


class InvalidInput(AnalysisError):
    code = "invalid-input"


class InvalidGrid(AnalysisError):
    code = "invalid-grid"


class MeanNotRemoved(AnalysisError):
    code = "mean-not-removed"

    def __init__(self, measured, tolerance):
        super().__init__(
            f"zero-frequency mass |f^(0)|={measured:.3e} exceeds {tolerance:.1e}*||f||_2; "
            "remove the mean first",
            measured=measured,
            tolerance=tolerance,
        )
        self.measured = measured


class BetaTooSmall(AnalysisError):
    code = "beta-too-small"


class HypothesisViolated(AnalysisError):
    code = "hypothesis-violated"


class UnknownExperiment(AnalysisError):
    code = "unknown-experiment"
