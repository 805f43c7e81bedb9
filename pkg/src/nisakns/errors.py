"""Exception types shared across the package.

The split mirrors how callers recover: shape/domain problems are caller
bugs (ValueError family), conditioning/blow-up/stiffness are runtime
facts about the data (RuntimeError family).
"""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class DomainError(ValueError):
    """An input violates a documented precondition."""


class SingularGeneratorError(ValueError):
    """The diagonal generator has coincident entries."""


class GridError(ValueError):
    """A grid is too small or non-uniform for the configured stencils."""


class StencilError(ValueError):
    """Not enough samples to form the requested finite-difference stencil."""


class DecayError(ValueError):
    """A field fails the edge-decay (Schwartz proxy) requirement."""

    def __init__(self, message, edge_magnitude=None):
        super().__init__(message)
        self.edge_magnitude = edge_magnitude


class ConditioningError(RuntimeError):
    """A matrix is numerically singular; carries the offending determinant."""

    def __init__(self, message, det=None):
        super().__init__(message)
        self.det = det


class BlowUpError(RuntimeError):
    """The spectral flow leaves its domain; carries the critical time."""

    def __init__(self, message, critical_time=None):
        super().__init__(message)
        self.critical_time = critical_time


class StiffnessError(RuntimeError):
    """Fixed-step integration rejected a step (divergent iterate)."""


class DegenerateDressingError(ValueError):
    """Dressing requested at (or too close to) an eigenvalue of S."""


class ConfigError(ValueError):
    """Configuration text failed validation; carries line diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [(0, diagnostics)]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"line {ln}: {msg}" if ln else msg
                                   for ln, msg in self.diagnostics))
