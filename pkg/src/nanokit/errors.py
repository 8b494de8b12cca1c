"""Exception hierarchy shared by all nanokit modules."""


class NanokitError(Exception):
    """Base class; the CLI maps subclasses to exit codes by name."""


class ConfigError(NanokitError, ValueError):
    pass


class NoBracket(NanokitError):
    pass


class NoConvergence(NanokitError):
    pass


class Overflow(NanokitError, OverflowError):
    pass


class GridTooCoarse(NanokitError, ValueError):
    pass


class NearSingular(NanokitError):
    pass


class TailTooFat(NanokitError):
    pass


class NoContraction(NanokitError):
    pass


class ArcsinDomain(NanokitError):
    pass


class JumpTooLarge(NanokitError):
    pass


class Instability(NanokitError):
    pass
