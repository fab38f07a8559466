"""Exception hierarchy shared by every holab module."""

from __future__ import annotations


class HolabError(Exception):
    """Base class for all library errors."""


class NonHermitian(HolabError):
    pass


class NegativeEigenvalue(HolabError):
    pass


class InvalidState(HolabError):
    """Trace, shape or normalization check failed."""


class DimensionMismatch(HolabError):
    pass


class SingularState(HolabError):
    """An operator that must be invertible (faithful) is not."""


class FiberMismatch(HolabError):
    """An amplitude does not lie in the declared fiber."""


class DegeneracyChange(HolabError):
    pass


class DegenerateSpectrum(HolabError):
    pass


class BadFSpec(HolabError):
    pass


class IndexOutOfRange(HolabError):
    pass


class BadIndex(HolabError):
    pass


class NotReal(HolabError):
    pass


class NotPure(HolabError):
    pass


class NotOrbitTangent(HolabError):
    pass


class ZeroProbability(HolabError):
    pass


class HypothesisViolated(HolabError):
    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        msg = hypothesis if not detail else f"{hypothesis}: {detail}"
        super().__init__(msg)


class NotHorizontal(HolabError):
    pass


class SingularGram(HolabError):
    pass


class AntipodalPair(HolabError):
    pass


class NotIsospectral(HolabError):
    pass


class OutsideBall(HolabError):
    pass


class BadSpectrum(HolabError):
    pass


class ConventionViolated(HolabError):
    pass


class OriginExcluded(HolabError):
    pass


class NodeEncountered(HolabError):
    """The geometric phase factor vanishes, so the phase is undefined."""


class NotUnitary(HolabError):
    pass


class ParseError(HolabError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class SchemaError(HolabError):
    def __init__(self, message: str, field: str | None = None):
        self.field = field
        prefix = f"field '{field}': " if field else ""
        super().__init__(prefix + message)
