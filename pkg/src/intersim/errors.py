"""Exception types shared across the simulator."""


class IntersimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(IntersimError):
    pass


class EmptyScene(IntersimError):
    pass


class InsufficientData(IntersimError):
    pass


class ComponentCollapse(IntersimError):
    pass


class InvalidCondition(IntersimError):
    pass


class DegenerateLikelihoods(IntersimError):
    pass


class InvalidKnots(IntersimError):
    pass


class NumericalFault(IntersimError):
    def __init__(self, layer: str, detail: str = ""):
        self.layer = layer
        super().__init__(f"non-finite value in {layer}" + (f": {detail}" if detail else ""))


class MissingHistory(IntersimError):
    pass


class EmptyBatch(IntersimError):
    pass


class PriorRejection(IntersimError):
    def __init__(self, kind: str, attempts: int, reasons: dict):
        self.kind = kind
        self.attempts = attempts
        self.reasons = dict(reasons)
        super().__init__(
            f"gave up sampling a {kind} prior after {attempts} attempts (rejections: {self.reasons})"
        )


class ConfigMismatch(IntersimError):
    pass


class EmptyEval(IntersimError):
    pass


class NoPairs(IntersimError):
    pass


class ParseError(IntersimError):
    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"line {line}: {detail}")


class InvalidRegion(IntersimError):
    pass


class InvalidSpeed(IntersimError):
    pass
