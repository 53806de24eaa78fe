class HGraphParseError(ValueError):
    """Raised when a graph document is not well-formed."""


class HGraphValidationError(ValueError):
    """Raised when a graph or pairing violates symmetry, diagonal, index or disjointness rules."""


class OperatorDegreeError(ValueError):
    """Raised when a monomial outside the quadratic basis reaches normal ordering."""


class ApproximateOperatorError(ValueError):
    """Raised when a floating-coefficient operator is handed to an exact routine."""


class SeriesConvergenceError(ArithmeticError):
    """Raised when the propagator series does not converge within its iteration budget."""


class SectorError(ValueError):
    """Raised for malformed spin-sector requests (shapes, half-integers, overlapping pairs, normalization)."""


class TemplateMismatchError(ValueError):
    """Raised when a graph does not fit the twin 4-mode template of the perturbative qubit state."""
