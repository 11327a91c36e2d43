"""Exception types raised by the solvers and model builders."""


class ArrMdpError(Exception):
    pass


class InvalidPolicy(ArrMdpError):
    pass


class InvalidParams(ArrMdpError, ValueError):
    pass


class SolverFailure(ArrMdpError):
    pass


class SingularSystem(SolverFailure):
    pass


class NonTerminating(SolverFailure):
    """Some policy's chain never reaches the terminal state."""


class HorizonTooSmall(ArrMdpError, ValueError):
    pass


class ZeroDifficulty(ArrMdpError):
    """Average difficulty per step vanishes, so the revenue ratio is undefined."""


class BracketFailure(ArrMdpError):
    pass


class BracketInvalid(ArrMdpError):
    pass


class MaxIterationsExceeded(RuntimeWarning):
    """Policy iteration hit its cap; the best policy so far is returned unconverged."""
