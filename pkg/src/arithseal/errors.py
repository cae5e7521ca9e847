"""Exception hierarchy shared by every arithseal module."""


class ArithSealError(Exception):
    """Base class for all typed errors raised by this package."""


# -- model -------------------------------------------------------------------

class ModelError(ArithSealError, ValueError):
    pass


class EmptyAlphabet(ModelError):
    pass


class ZeroFrequency(ModelError):
    pass


class FrequencyOverflow(ModelError):
    pass


class KeySizeMismatch(ModelError):
    pass


class SlotOutOfRange(ModelError):
    pass


# -- coders ------------------------------------------------------------------

class CodecError(ArithSealError):
    pass


class SymbolOutOfRange(CodecError, ValueError):
    pass


class ZeroWidth(CodecError, ValueError):
    pass


class ForbiddenSymbolHit(CodecError):
    """The decoder landed inside the forbidden slot.

    ``index`` is the position of the symbol being decoded when it happened;
    ``decoded`` holds the symbols recovered before that point.
    """

    def __init__(self, index, decoded=()):
        super().__init__(f"forbidden symbol reached while decoding symbol {index}")
        self.index = index
        self.decoded = list(decoded)


class ForbiddenRegionHit(ForbiddenSymbolHit):
    """Raised by the rational reference decoder."""


class UnexpectedEndOfData(CodecError):
    def __init__(self, index, decoded=()):
        super().__init__(f"ran out of input while decoding symbol {index}")
        self.index = index
        self.decoded = list(decoded)


# -- security ----------------------------------------------------------------

class SecurityError(ArithSealError):
    pass


class EmptyCdsList(SecurityError, ValueError):
    pass


class KeyInvalid(SecurityError, ValueError):
    pass


class MalformedSeal(SecurityError, ValueError):
    pass


class EntropyUnavailable(SecurityError):
    pass


# -- container ---------------------------------------------------------------

class ContainerError(ArithSealError):
    pass


class BadMagic(ContainerError):
    pass


class UnsupportedVersion(ContainerError):
    pass


class TruncatedFile(ContainerError):
    pass


class LengthMismatch(ContainerError):
    pass


class InvalidDescriptor(ContainerError):
    """Header fields are individually well-formed but mutually inconsistent."""


class KeyRequired(ContainerError):
    pass


# -- analysis ----------------------------------------------------------------

class EpsilonUnrepresentable(ArithSealError, ValueError):
    pass
