"""Exception types shared across the package."""


class CmmError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CmmError):
    """Malformed mesh file (bad header, counts, or indices)."""


class ValidationError(CmmError):
    """Mesh violates a structural invariant (degenerate face, bad index, non-manifold edge)."""


class DegenerateTriangleError(CmmError):
    """A triangle angle is so close to zero that its cotangent is numerically useless."""


class NotPositiveDefinite(CmmError):
    """Mass matrix failed a positive-definite factorization."""


class RankDeficient(CmmError):
    """Columns are collinear under the mass inner product; projection undefined."""


class FactorizationError(CmmError):
    """Sparse SPD factorization of the E-step system failed."""
