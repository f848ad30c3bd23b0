"""2-D affine transforms between triangle pairs."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularGeometryError

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class AffineTransform2D:
    """Row-major 2x3 matrix mapping (x, y, 1) -> (x', y')."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise InvalidInputError(f"affine matrix must be 2x3, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (..., 2) points through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def determinant(self) -> float:
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def inverse(self) -> "AffineTransform2D":
        det = self.determinant()
        if abs(det) <= DEGENERATE_AREA:
            raise SingularGeometryError(f"transform is not invertible (|det|={abs(det):.3e})")
        m = self.matrix
        inv_lin = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
        inv_t = -inv_lin @ m[:, 2]
        return AffineTransform2D(np.column_stack([inv_lin, inv_t]))

    @staticmethod
    def identity() -> "AffineTransform2D":
        return AffineTransform2D(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


def solve_affine(src: np.ndarray, dst: np.ndarray) -> AffineTransform2D:
    """Exact affine transform carrying three source vertices onto three targets.

    Solves the 6-unknown linear system [x y 1] @ [[a d], [b e], [c f]] = [x' y'];
    both output rows share the same 3x3 system matrix.

    Raises SingularGeometryError when the source triangle is degenerate
    (|signed area| <= 1e-12).
    """
    s = np.asarray(src, dtype=np.float64)
    d = np.asarray(dst, dtype=np.float64)
    if s.shape != (3, 2) or d.shape != (3, 2):
        raise InvalidInputError(f"src and dst must be (3, 2), got {s.shape} and {d.shape}")
    area2 = (s[1, 0] - s[0, 0]) * (s[2, 1] - s[0, 1]) - (s[1, 1] - s[0, 1]) * (s[2, 0] - s[0, 0])
    if abs(area2) <= 2.0 * DEGENERATE_AREA:
        raise SingularGeometryError(f"source triangle is degenerate (area={area2 / 2.0:.3e})")
    lhs = np.column_stack([s, np.ones(3)])
    coeffs = np.linalg.solve(lhs, d)  # (3, 2): columns are [a b c], [d e f]
    return AffineTransform2D(coeffs.T)
