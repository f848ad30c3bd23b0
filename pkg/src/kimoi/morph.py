"""Piecewise-affine face morphing.

Re-renders frames so that facial regions follow target landmark
positions: per mesh triangle, the source->target affine map is solved,
the source frame is inverse-warped over the target triangle's bounding
box, and a coverage mask composites the warped patch into the output.

Pixel conventions (shared with the rasterizer oracle in the tests):
  - pixel (x, y) covers the square [x, x+1) x [y, y+1), center (x+.5, y+.5);
  - coverage at edges follows the top-left fill rule, so triangles that
    share an edge never double-blend a pixel and never leave a gap;
  - warping samples with bilinear interpolation, clamping to the source
    edge, with float32 accumulation and round-half-to-even on store.

The output frame starts as a copy of the source, so pixels outside the
union of target triangles are bit-identical to the input.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .affine import AffineTransform2D, solve_affine
from .delaunay import TriangleMesh, triangle_signed_area
from .errors import InvalidInputError, SequenceMismatchError
from .frames import FrameSequence

log = logging.getLogger("kimoi")

SKIP_AREA = 1e-9  # px^2; triangles collapsed below this are skipped per frame
AA_SUBSAMPLES = 4  # anti-aliased coverage uses an AA_SUBSAMPLES^2 grid


@dataclass(frozen=True)
class TriangleMask:
    """Per-pixel coverage of one triangle inside its clipped bounding box."""

    x0: int
    y0: int
    coverage: np.ndarray  # (h, w) float32 in [0, 1]

    @property
    def empty(self) -> bool:
        return self.coverage.size == 0


_EMPTY_MASK = TriangleMask(0, 0, np.zeros((0, 0), dtype=np.float32))


def _edge_setup(tri: np.ndarray):
    """Vertices wound to positive signed area plus per-edge top-left flags."""
    t = np.asarray(tri, dtype=np.float64)
    if triangle_signed_area(t) < 0:
        t = t[[0, 2, 1]]
    a, b, c = t
    setup = []
    for p, q in [(a, b), (b, c), (c, a)]:
        dx, dy = q[0] - p[0], q[1] - p[1]
        top_left = dy < 0 or (dy == 0 and dx > 0)
        setup.append((p[0], p[1], dx, dy, top_left))
    return setup


def _coverage_at(setup, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Boolean coverage of sample points (px, py) under the top-left rule."""
    inside = np.ones(px.shape, dtype=bool)
    for ax, ay, dx, dy, top_left in setup:
        e = dx * (py - ay) - dy * (px - ax)
        inside &= (e > 0) | ((e == 0) & top_left)
    return inside


def rasterize_mask(tri: np.ndarray, height: int, width: int, anti_alias: bool = False) -> TriangleMask:
    """Coverage mask of a triangle given in pixel coordinates.

    Binary mode tests pixel centers; anti-aliased mode averages a 4x4
    subsample grid per pixel (approximate coverage). Off-image triangles
    are clipped; degenerate ones yield an empty mask.
    """
    t = np.asarray(tri, dtype=np.float64)
    if t.shape != (3, 2):
        raise InvalidInputError(f"triangle must be (3, 2), got {t.shape}")
    if abs(triangle_signed_area(t)) <= 1e-12:
        return _EMPTY_MASK

    x0 = max(0, int(np.floor(t[:, 0].min())) - 1)
    y0 = max(0, int(np.floor(t[:, 1].min())) - 1)
    x1 = min(width, int(np.ceil(t[:, 0].max())) + 1)
    y1 = min(height, int(np.ceil(t[:, 1].max())) + 1)
    if x0 >= x1 or y0 >= y1:
        return _EMPTY_MASK

    setup = _edge_setup(t)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    if not anti_alias:
        cov = _coverage_at(setup, xs + 0.5, ys + 0.5).astype(np.float32)
    else:
        s = AA_SUBSAMPLES
        offs = (2.0 * np.arange(s) + 1.0) / (2.0 * s)
        acc = np.zeros(xs.shape, dtype=np.float32)
        for oy in offs:
            for ox in offs:
                acc += _coverage_at(setup, xs + ox, ys + oy)
        cov = acc / (s * s)
    if not cov.any():
        return _EMPTY_MASK
    return TriangleMask(x0, y0, cov)


def warp_affine(image: np.ndarray, transform: AffineTransform2D, roi: tuple[int, int, int, int]) -> np.ndarray:
    """Inverse-mapping affine warp of a source image onto a target ROI.

    Each target pixel center is pulled back through the inverse transform
    and sampled bilinearly from the source; samples outside the source
    clamp to the edge. Returns an (h, w, 3) float32 patch.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidInputError(f"image must be (H, W, 3), got {img.shape}")
    x0, y0, w, h = roi
    inv = transform.inverse()

    ys, xs = np.mgrid[y0 : y0 + h, x0 : x0 + w]
    targets = np.stack([xs + 0.5, ys + 0.5], axis=-1)
    src = inv.apply(targets)

    src_h, src_w = img.shape[:2]
    u = np.clip(src[..., 0] - 0.5, 0.0, src_w - 1.0)
    v = np.clip(src[..., 1] - 0.5, 0.0, src_h - 1.0)
    iu = np.minimum(np.floor(u).astype(np.intp), src_w - 2) if src_w > 1 else np.zeros_like(u, dtype=np.intp)
    iv = np.minimum(np.floor(v).astype(np.intp), src_h - 2) if src_h > 1 else np.zeros_like(v, dtype=np.intp)
    fu = (u - iu).astype(np.float32)[..., None]
    fv = (v - iv).astype(np.float32)[..., None]

    img_f = img.astype(np.float32, copy=False)
    iu1 = np.minimum(iu + 1, src_w - 1)
    iv1 = np.minimum(iv + 1, src_h - 1)
    p00 = img_f[iv, iu]
    p01 = img_f[iv, iu1]
    p10 = img_f[iv1, iu]
    p11 = img_f[iv1, iu1]
    top = p00 * (1.0 - fu) + p01 * fu
    bot = p10 * (1.0 - fu) + p11 * fu
    return top * (1.0 - fv) + bot * fv


def morph_frame(
    src_frame: np.ndarray,
    l_src: np.ndarray,
    l_dst: np.ndarray,
    mesh: TriangleMesh,
    anti_alias: bool = False,
) -> np.ndarray:
    """Morph one frame so its landmarks move from l_src to l_dst.

    Landmarks are in pixel coordinates of the frame. Triangles are
    composited sequentially in mesh order (overwrite semantics); ones
    degenerate in either configuration are skipped with a warning.
    """
    frame = np.asarray(src_frame)
    if frame.dtype != np.uint8 or frame.ndim != 3 or frame.shape[2] != 3:
        raise InvalidInputError(f"frame must be (H, W, 3) uint8, got {frame.shape} {frame.dtype}")
    height, width = frame.shape[:2]
    out = frame.astype(np.float32)

    skipped = 0
    for f in mesh.triangles:
        s_tri = l_src[f]
        t_tri = l_dst[f]
        if abs(triangle_signed_area(s_tri)) < SKIP_AREA or abs(triangle_signed_area(t_tri)) < SKIP_AREA:
            skipped += 1
            continue
        mask = rasterize_mask(t_tri, height, width, anti_alias)
        if mask.empty:
            continue
        transform = solve_affine(s_tri, t_tri)
        x0, y0 = mask.x0, mask.y0
        h, w = mask.coverage.shape
        patch = warp_affine(frame, transform, (x0, y0, w, h))
        cov = mask.coverage[..., None]
        region = out[y0 : y0 + h, x0 : x0 + w]
        out[y0 : y0 + h, x0 : x0 + w] = region * (1.0 - cov) + patch * cov
    if skipped:
        log.warning("morph skipped %d degenerate triangle(s) in one frame", skipped)

    return np.clip(np.rint(out), 0.0, 255.0).astype(np.uint8)


def morph_sequence(
    frames: FrameSequence,
    l_src: np.ndarray,
    l_dst: np.ndarray,
    mesh: TriangleMesh,
    anti_alias: bool = False,
    threads: int = 1,
) -> FrameSequence:
    """Morph every frame independently; output does not depend on `threads`."""
    src = np.asarray(l_src, dtype=np.float64)
    dst = np.asarray(l_dst, dtype=np.float64)
    t = frames.n_frames
    if src.shape != dst.shape or src.ndim != 3 or src.shape[0] != t:
        raise SequenceMismatchError(
            f"landmarks must both be ({t}, N, 2); got {src.shape} and {dst.shape}"
        )

    def one(i: int) -> np.ndarray:
        return morph_frame(frames.frames[i], src[i], dst[i], mesh, anti_alias)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(t)))
    else:
        results = [one(i) for i in range(t)]
    return FrameSequence(np.stack(results))
