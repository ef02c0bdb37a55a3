"""Exception taxonomy shared across the package.

Validation-type errors subclass :class:`ValueError` so plain ``except
ValueError`` call sites keep working; IO failures subclass :class:`OSError`.
"""


class TrajtrustError(Exception):
    """Base class for every error raised by this package."""


class ParseError(TrajtrustError, ValueError):
    """A serialized record could not be parsed."""

    def __init__(self, line_no: int | None, reason: str):
        location = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{location}{reason}")
        self.line_no = line_no
        self.reason = reason


class InvariantViolation(TrajtrustError, ValueError):
    """A value breaks one of the documented data-model invariants."""

    def __init__(self, reason: str, scene_id: str | None = None):
        prefix = f"scene {scene_id}: " if scene_id else ""
        super().__init__(f"{prefix}{reason}")
        self.scene_id = scene_id
        self.reason = reason


class IoError(TrajtrustError, OSError):
    """A file could not be read or written."""


class UnknownAgent(TrajtrustError, KeyError):
    """An agent id does not exist (or is not usable) in the given scene."""

    def __init__(self, agent_id: str, detail: str = ""):
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"unknown agent {agent_id!r}{suffix}")
        self.agent_id = agent_id


class SpecError(TrajtrustError, ValueError):
    """A synthetic-generation spec is malformed."""


class DegenerateProduct(TrajtrustError, ArithmeticError):
    """All attention-prior products vanished; the combine has no signal."""


class DimensionMismatch(TrajtrustError, ValueError):
    """Vector/matrix operands do not share the required shape."""


class NonFiniteLoss(TrajtrustError, ArithmeticError):
    """The attention loss is not finite and smoothing was disabled."""


class NonFiniteInput(TrajtrustError, ValueError):
    """A numeric input contains NaN or infinity."""


class TooShort(TrajtrustError, ValueError):
    """A trajectory has too few samples for the requested derivative order."""


class HorizonMismatch(TrajtrustError, ValueError):
    """Prediction and ground-truth horizons differ in length."""


class DegenerateVariance(TrajtrustError, ArithmeticError):
    """Correlation is undefined because one input has zero variance."""
