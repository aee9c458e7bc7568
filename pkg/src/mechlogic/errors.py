"""Exception hierarchy shared by every subpackage."""


class MechLogicError(Exception):
    """Base class for all domain errors raised by mechlogic."""


class InvalidSpec(MechLogicError, ValueError):
    pass


class NoConvergence(MechLogicError):
    """Root finder exhausted its iteration budget or left the physical branch."""


class GeometryInfeasible(MechLogicError):
    pass


class PortMismatch(MechLogicError):
    pass


class UnknownPort(MechLogicError, KeyError):
    pass


class DoubleWire(MechLogicError):
    pass


class NumericalBlowup(MechLogicError, FloatingPointError):
    """A coordinate became non-finite; usually the time step is too large."""


class NoCycles(MechLogicError):
    pass


class Unsettled(MechLogicError):
    pass


class UnboundChannel(MechLogicError):
    pass


class DuplicateId(MechLogicError):
    def __init__(self, ident, line=None, column=None):
        self.ident = ident
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"duplicate identifier {ident!r}{where}")


class UnknownReference(MechLogicError):
    def __init__(self, ident, line=None, column=None):
        self.ident = ident
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"unknown reference {ident!r}{where}")


class NetlistSyntaxError(MechLogicError, SyntaxError):
    """Parse failure with a 1-based line/column and what the parser expected."""

    def __init__(self, line, column, expected, text=""):
        self.line = line
        self.column = column
        self.expected = expected
        self.source_line = text
        super().__init__(f"line {line}, column {column}: expected {expected}")
