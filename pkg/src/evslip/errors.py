"""Exception hierarchy shared by every evslip module."""


class EvslipError(Exception):
    """Base class for all library errors."""


# -- event streams and EVS1 files ------------------------------------------

class EventFileError(EvslipError, ValueError):
    pass


class UnsortedEvents(EventFileError):
    pass


class CoordinateOutOfRange(EventFileError):
    pass


class BadMagic(EventFileError):
    pass


class UnsupportedVersion(EventFileError):
    pass


class TruncatedRecord(EventFileError):
    pass


class NonMonotonicTimestamp(EventFileError):
    pass


class CorruptRecord(EventFileError):
    pass


class ZeroWindow(EvslipError, ValueError):
    pass


class IoFailure(EvslipError, OSError):
    pass


class GeometryMismatch(EvslipError, ValueError):
    pass


class EmptyGeometry(EvslipError, ValueError):
    pass


# -- contact / control / plant ---------------------------------------------

class NoContact(EvslipError):
    """The accumulated contact area is empty: the grasp never touched."""


class NonFiniteError(EvslipError, ValueError):
    pass


class NegativeForce(EvslipError, ValueError):
    pass


class NonPositiveDt(EvslipError, ValueError):
    pass


# -- wire protocol ---------------------------------------------------------

class NeedMoreData(EvslipError):
    """Incomplete frame. Not fatal: feed more bytes and retry."""


class ProtocolError(EvslipError):
    """Corrupt or disallowed traffic. The session must be closed."""


class FrameBadMagic(ProtocolError):
    pass


class UnsupportedFrameVersion(ProtocolError):
    pass


class UnknownType(ProtocolError):
    pass


class LengthMismatch(ProtocolError):
    pass


class InvalidPayload(ProtocolError):
    pass


class PayloadTooLarge(EvslipError, ValueError):
    pass


class HandshakeError(ProtocolError):
    pass


class RoleConflict(HandshakeError):
    pass


class HandshakeTimeout(HandshakeError):
    pass


class UnexpectedMessage(HandshakeError):
    pass


# -- experiment orchestration ----------------------------------------------

class ConfigInvalid(EvslipError, ValueError):
    pass


class NetworkFailure(EvslipError):
    pass


class MaskFailure(EvslipError):
    pass
