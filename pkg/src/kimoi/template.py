"""Synthetic 68-point mean face in normalized crop coordinates.

The template is aligned by construction: the nose tip (index 30) sits at
exactly (0.5, 0.5), y grows downward, and every point is inside [0,1]^2.
Eye and mouth contours are ellipse arcs, the jaw is an ellipse arc from
temple to temple, so no landmark subset is accidentally co-circular.
"""

import numpy as np

from .regions import N_LANDMARKS


def mean_face_template() -> np.ndarray:
    """(68, 2) float64 mean face, read-only."""
    pts = np.zeros((N_LANDMARKS, 2), dtype=np.float64)

    # Jaw 0-16: ellipse arc, left temple -> chin -> right temple.
    phi = np.deg2rad(170.0 - 10.0 * np.arange(17))
    pts[0:17, 0] = 0.5 + 0.30 * np.cos(phi)
    pts[0:17, 1] = 0.40 + 0.46 * np.sin(phi)

    # Eyebrows 17-21 / 22-26: shallow arcs above the eyes.
    t = np.linspace(0.0, 1.0, 5)
    arch = 0.375 - 0.018 * np.sin(np.pi * t)
    pts[17:22, 0] = 0.26 + 0.17 * t
    pts[17:22, 1] = arch
    pts[22:27, 0] = 0.57 + 0.17 * t
    pts[22:27, 1] = arch[::-1]

    # Nose bridge 27-30 (tip at 30) and base 31-35.
    pts[27:31, 0] = 0.5
    pts[27:31, 1] = np.linspace(0.385, 0.5, 4)
    pts[31:36, 0] = np.array([0.44, 0.47, 0.50, 0.53, 0.56])
    pts[31:36, 1] = np.array([0.545, 0.555, 0.560, 0.555, 0.545])

    def ellipse(center, a, b, degrees):
        th = np.deg2rad(np.asarray(degrees, dtype=np.float64))
        return np.column_stack([center[0] + a * np.cos(th), center[1] - b * np.sin(th)])

    # Eyes 36-41 / 42-47: corner, two upper-lid, corner, two lower-lid points.
    eye_angles = [180, 120, 60, 0, -60, -120]
    pts[36:42] = ellipse((0.355, 0.435), 0.055, 0.022, eye_angles)
    pts[42:48] = ellipse((0.645, 0.435), 0.055, 0.022, eye_angles)

    # Mouth: outer lip 48-59, inner lip 60-67.
    outer_angles = [180, 150, 120, 90, 60, 30, 0, -30, -60, -90, -120, -150]
    inner_angles = [180, 135, 90, 45, 0, -45, -90, -135]
    pts[48:60] = ellipse((0.5, 0.66), 0.085, 0.042, outer_angles)
    pts[60:68] = ellipse((0.5, 0.66), 0.055, 0.015, inner_angles)

    pts.flags.writeable = False
    return pts
