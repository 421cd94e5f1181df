"""Exception hierarchy shared by all bergcomp modules."""

from __future__ import annotations


class BergcompError(Exception):
    """Base class for every error raised by this package."""


class DomainSpecError(BergcompError, ValueError):
    """A domain spec string or constructor argument is malformed."""


class PointOutsideDomain(BergcompError, ValueError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class KernelNotAvailable(BergcompError):
    """The domain only carries structure constants, no evaluable kernel."""


class UnsupportedDomain(BergcompError):
    pass


class BetaOutOfRange(BergcompError, ValueError):
    pass


class ParameterOutOfRange(BergcompError, ValueError):
    pass


class NonFiniteIntegrand(BergcompError, ArithmeticError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ImageOutsideDomain(BergcompError, ValueError):
    """A map sent a point of the domain outside of it (or to inf/nan)."""

    def __init__(self, message, witness=None, image=None):
        super().__init__(message)
        self.witness = witness
        self.image = image


class MapParseError(BergcompError, ValueError):
    """Syntax error in the holomorphic-map language.

    ``position`` is the 0-based character offset into the source text and
    ``expected`` a short description of what the parser was looking for.
    """

    def __init__(self, message, text="", position=0, expected=""):
        self.text = text
        self.position = position
        self.expected = expected
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
