"""Exception hierarchy shared by all modules.

Every error carries a ``category`` string which the CLI maps to a distinct
exit status.
"""


class StirapError(Exception):
    category = "domain"


class PoleProximity(StirapError):
    """Complex time too close to a singularity of the shape function."""


class DegenerateAngle(StirapError):
    """Mixing angle undefined because both envelopes vanish."""


class WindowTooNarrow(StirapError):
    """Envelopes at the window edges exceed the configured floor."""


class NonHermitianInput(StirapError):
    pass


class StepUnderflow(StirapError):
    """The adaptive integrator could not make progress."""


class NotNormalized(StirapError):
    pass


class DetuningTooSmall(StirapError):
    pass


class NoConvergence(StirapError):
    pass


class BoxContainsPole(StirapError):
    pass


class ContourBlocked(StirapError):
    pass


class HigherOrderZero(StirapError):
    pass


class RealAxisZero(StirapError):
    """Quasienergy splitting vanishes on the real axis."""


class NoBreakdownDetected(StirapError):
    pass


class ConfigError(StirapError):
    category = "validation"


class ParseError(ConfigError):
    category = "parse"
