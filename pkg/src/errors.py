"""
Exception hierarchy for the remote tracking simulator
Library code raises these, only the CLI maps them to exit codes
"""

from typing import List, Optional, Tuple


class RemoteTrackError(Exception):
    """Base class for every error raised by this package"""


class NonFiniteState(RemoteTrackError):
    """
    A flow evaluation produced NaN/inf, or the state left the divergence ceiling
    """

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


class StepMisaligned(RemoteTrackError):
    """An interval or period is not an integer number of integration steps"""


class ScheduleConflict(RemoteTrackError):
    """Two jump schedules fire at the same instant without a declared order"""


class BudgetTooSmall(RemoteTrackError):
    """The bit budget cannot carry even two quantization levels per component"""


class FrameIndexMismatch(RemoteTrackError):
    """Decoder received symbols for a sample index other than its own"""


class MalformedFrame(RemoteTrackError):
    """Payload length or a packed level index is out of range"""


class NotHurwitz(RemoteTrackError):
    """Coefficient polynomial of the high-gain injection fails the Routh test"""


class ConfigError(RemoteTrackError):
    """
    Scenario config failed to parse or validate

    diagnostics holds (key path, line, message) triples; line is None when
    the offending key is absent from the document.
    """

    def __init__(self, message: str, diagnostics: Optional[List[Tuple[str, Optional[int], str]]] = None):
        self.diagnostics = diagnostics or []
        super().__init__(message)

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        lines = [base]
        for key, line, msg in self.diagnostics:
            where = f"line {line}" if line is not None else "missing"
            lines.append(f"  {key} ({where}): {msg}")
        return "\n".join(lines)
