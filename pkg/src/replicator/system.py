from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .linalg import as_square, as_vector, mat_exp


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Linear plant dx/dt = A x + b u on [0, T] with x(0) = a."""

    A: np.ndarray
    b: np.ndarray
    a: np.ndarray
    T: float

    def __post_init__(self):
        A = as_square(self.A)
        b = as_square(self.b)
        n = A.shape[0]
        if b.shape != A.shape:
            raise InvalidArgumentError(f"b must be {n}x{n}, got {b.shape}")
        a = as_vector(self.a, n)
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidArgumentError("T must be positive")
        scale = max(1.0, float(np.max(np.abs(b))))
        if abs(np.linalg.det(b)) <= 1e-12 * scale**n:
            raise InvalidArgumentError("b must be a non-degenerate matrix")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "T", float(self.T))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def free_terminal_state(self) -> np.ndarray:
        """q = exp(A T) a, the terminal state under zero control."""
        return mat_exp(self.A, self.T) @ self.a
