"""Package-level error types."""


class NonFiniteError(RuntimeError):
    """A computation produced NaN or infinity where finite values are required."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or became unstable."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; `stage` names the failing stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
