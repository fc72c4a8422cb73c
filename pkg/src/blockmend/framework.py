"""Patch scheduling, context extraction, and candidate gathering.

Geometry conventions used throughout:

* a patch is the 2x2 pixel group at ``patch_origin`` (top-left corner);
* its window is the 6x6 neighbourhood whose origin is ``patch_origin - 2``;
* the context layout is the fixed row-major list of the 32 window offsets
  that are not patch cells; candidates reuse the target's layout;
* the support area of a patch is the 3x3 block neighbourhood of its owning
  16x16 block, clipped to the image. Candidate windows must fit inside it.

Candidate windows are grouped into square (Chebyshev) rings around the
patch. Ring 1 covers candidate-patch origins within radius 3 (the closest
windows that can clear the missing patch); each further ring grows the
radius by one pixel. Within a ring, windows are ordered raster-wise, so
gathering is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyContextError
from .image import BLOCK_SIZE, ImageBuffer, LossMask, PixelState

WINDOW = 6
PATCH = 2
# window offsets of the patch cells, row-major
PATCH_OFFSETS = np.array([(2, 2), (2, 3), (3, 2), (3, 3)], dtype=np.intp)
_PATCH_CELLS = {tuple(o) for o in PATCH_OFFSETS.tolist()}
CONTEXT_OFFSETS = np.array(
    [(r, c) for r in range(WINDOW) for c in range(WINDOW) if (r, c) not in _PATCH_CELLS],
    dtype=np.intp,
)
N_CONTEXT = len(CONTEXT_OFFSETS)  # 32
N_PATCH = len(PATCH_OFFSETS)  # 4

_FIRST_RING_RADIUS = 3


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, ImageBuffer) else img


def _states(mask) -> np.ndarray:
    return mask.states if isinstance(mask, LossMask) else mask


@dataclass(frozen=True)
class PatchJob:
    """One 2x2 patch to conceal, with its scheduling score."""

    patch_origin: tuple[int, int]
    block_id: tuple[int, int]
    reliability: int


@dataclass
class TargetContext:
    """The missing patch plus its usable 6x6 context."""

    patch_origin: tuple[int, int]
    layout_usable: np.ndarray  # bool per CONTEXT_OFFSETS entry
    y0: np.ndarray  # usable context samples, layout order
    n_y: int
    n_x: int = N_PATCH
    _used_offsets: np.ndarray | None = field(default=None, repr=False)

    def used_offsets(self) -> np.ndarray:
        """Window offsets read for each candidate: usable context, then patch."""
        if self._used_offsets is None:
            self._used_offsets = np.vstack(
                [CONTEXT_OFFSETS[self.layout_usable], PATCH_OFFSETS]
            )
        return self._used_offsets


@dataclass
class CandidateSet:
    """Prototype/context pairs gathered from the support area."""

    x: np.ndarray  # (M', 4)
    y: np.ndarray  # (M', N_y)
    ring_index: int
    exhausted: bool

    @property
    def m_current(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ExpansionMap:
    """Candidate window origins ordered by (ring, raster position)."""

    origins: np.ndarray  # (K, 2), sorted
    rings: np.ndarray  # (K,), ascending

    @property
    def max_ring(self) -> int:
        return int(self.rings[-1]) if len(self.rings) else 0

    def ring_slice(self, ring: int) -> tuple[int, int]:
        lo = int(np.searchsorted(self.rings, ring, side="left"))
        hi = int(np.searchsorted(self.rings, ring, side="right"))
        return lo, hi

    def prefix_end(self, rings: int) -> int:
        return int(np.searchsorted(self.rings, rings, side="right"))


def block_origin_of(patch_origin: tuple[int, int]) -> tuple[int, int]:
    r, c = patch_origin
    return (r // BLOCK_SIZE) * BLOCK_SIZE, (c // BLOCK_SIZE) * BLOCK_SIZE


def support_bounds(shape: tuple[int, int], patch_origin: tuple[int, int]):
    """Pixel bounds (r0, r1, c0, c1) of the 3x3 block support area, clipped."""
    h, w = shape
    br, bc = block_origin_of(patch_origin)
    r0 = max(0, br - BLOCK_SIZE)
    r1 = min(h, br + 2 * BLOCK_SIZE)
    c0 = max(0, bc - BLOCK_SIZE)
    c1 = min(w, bc + 2 * BLOCK_SIZE)
    return r0, r1, c0, c1


def build_expansion_map(shape: tuple[int, int], patch_origin: tuple[int, int]) -> ExpansionMap:
    r0, r1, c0, c1 = support_bounds(shape, patch_origin)
    rows = np.arange(r0, r1 - WINDOW + 1, dtype=np.intp)
    cols = np.arange(c0, c1 - WINDOW + 1, dtype=np.intp)
    if len(rows) == 0 or len(cols) == 0:
        empty = np.empty((0,), dtype=np.intp)
        return ExpansionMap(np.empty((0, 2), dtype=np.intp), empty)
    pr, pc = patch_origin
    # Chebyshev distance between candidate patch origin (window origin + 2)
    # and the target patch origin
    dr = np.abs(rows + PATCH - pr)
    dc = np.abs(cols + PATCH - pc)
    dist = np.maximum(dr[:, None], dc[None, :])
    ring = np.maximum(dist, _FIRST_RING_RADIUS) - (_FIRST_RING_RADIUS - 1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    flat_r, flat_c, flat_ring = rr.ravel(), cc.ravel(), ring.ravel()
    order = np.lexsort((flat_c, flat_r, flat_ring))
    origins = np.column_stack((flat_r[order], flat_c[order]))
    return ExpansionMap(origins, flat_ring[order])


def extract_target(img, mask, patch_origin: tuple[int, int]) -> TargetContext:
    """Read the usable context around a patch; raises EmptyContextError if none."""
    pixels = _pixels(img)
    states = _states(mask)
    h, w = states.shape
    wr = patch_origin[0] - PATCH
    wc = patch_origin[1] - PATCH
    rows = wr + CONTEXT_OFFSETS[:, 0]
    cols = wc + CONTEXT_OFFSETS[:, 1]
    in_bounds = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    rows_c = np.clip(rows, 0, h - 1)
    cols_c = np.clip(cols, 0, w - 1)
    usable = in_bounds & (states[rows_c, cols_c] != PixelState.LOST)
    n_y = int(np.count_nonzero(usable))
    if n_y == 0:
        raise EmptyContextError(f"no usable context around patch {patch_origin}")
    y0 = pixels[rows_c[usable], cols_c[usable]].astype(np.float64, copy=True)
    return TargetContext(tuple(patch_origin), usable, y0, n_y)


def _collect(pixels, states, target: TargetContext, origins: np.ndarray):
    """Admissibility-filter origins and extract (x, y) value pairs."""
    offs = target.used_offsets()
    rows = origins[:, 0:1] + offs[:, 0][None, :]
    cols = origins[:, 1:2] + offs[:, 1][None, :]
    ok = (states[rows, cols] != PixelState.LOST).all(axis=1)
    if not ok.any():
        return (
            np.empty((0, N_PATCH), dtype=np.float64),
            np.empty((0, target.n_y), dtype=np.float64),
        )
    vals = pixels[rows[ok], cols[ok]]
    return vals[:, target.n_y :].copy(), vals[:, : target.n_y].copy()


def gather_candidates(img, mask, target: TargetContext, emap: ExpansionMap, rings: int) -> CandidateSet:
    """Gather all candidates whose window origin lies in rings 1..rings."""
    if rings < 1:
        raise ValueError("rings must be >= 1")
    pixels = _pixels(img)
    states = _states(mask)
    end = emap.prefix_end(rings)
    x, y = _collect(pixels, states, target, emap.origins[:end])
    reached = min(rings, emap.max_ring)
    return CandidateSet(x, y, ring_index=reached, exhausted=reached >= emap.max_ring)


def expand_support(img, mask, target: TargetContext, emap: ExpansionMap, cset: CandidateSet) -> CandidateSet:
    """Append the next ring's candidates; no-op when already exhausted."""
    if cset.exhausted:
        return cset
    ring = cset.ring_index + 1
    lo, hi = emap.ring_slice(ring)
    x_new, y_new = _collect(_pixels(img), _states(mask), target, emap.origins[lo:hi])
    x = np.concatenate([cset.x, x_new]) if cset.m_current else x_new
    y = np.concatenate([cset.y, y_new]) if cset.m_current else y_new
    return CandidateSet(x, y, ring_index=ring, exhausted=ring >= emap.max_ring)


def empty_candidate_set(target: TargetContext, emap: ExpansionMap) -> CandidateSet:
    return CandidateSet(
        np.empty((0, N_PATCH), dtype=np.float64),
        np.empty((0, target.n_y), dtype=np.float64),
        ring_index=0,
        exhausted=emap.max_ring == 0,
    )


def lost_patch_origins(states: np.ndarray, block_origin: tuple[int, int]) -> list[tuple[int, int]]:
    """Origins of the block's 2x2 patches that still contain a LOST pixel."""
    br, bc = block_origin
    out = []
    for r in range(br, br + BLOCK_SIZE, PATCH):
        for c in range(bc, bc + BLOCK_SIZE, PATCH):
            if (states[r : r + PATCH, c : c + PATCH] == PixelState.LOST).any():
                out.append((r, c))
    return out


def patch_scores(states: np.ndarray, pending: list[tuple[int, int]]):
    """(available_count, usable_count) of each pending patch's context."""
    h, w = states.shape
    origins = np.asarray(pending, dtype=np.intp)
    rows = origins[:, 0:1] + (CONTEXT_OFFSETS[:, 0] - PATCH)[None, :]
    cols = origins[:, 1:2] + (CONTEXT_OFFSETS[:, 1] - PATCH)[None, :]
    in_bounds = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    vals = states[np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1)]
    avail = (in_bounds & (vals == PixelState.AVAILABLE)).sum(axis=1)
    usable = (in_bounds & (vals != PixelState.LOST)).sum(axis=1)
    return avail, usable


def pick_next_patch(states: np.ndarray, pending: list[tuple[int, int]]):
    """Most reliable pending patch: max available context, then max usable
    context, then raster order."""
    avail, usable = patch_scores(states, pending)
    origins = np.asarray(pending, dtype=np.intp)
    raster = origins[:, 0] * states.shape[1] + origins[:, 1]
    best = np.lexsort((raster, -usable, -avail))[0]
    return pending[best], int(avail[best])


def build_schedule(mask: LossMask, block_id: tuple[int, int]) -> list[PatchJob]:
    """Simulated filling order for one block's lost patches.

    Reliability is recomputed after each (simulated) patch completion, so
    the returned order is exactly what a sequential reconstruction follows
    when no patch gets deferred.
    """
    from .image import BlockGrid

    grid = BlockGrid(mask.width, mask.height)
    origin = grid.block_origin(block_id)
    states = mask.states.copy()
    pending = lost_patch_origins(states, origin)
    jobs: list[PatchJob] = []
    while pending:
        patch, reliability = pick_next_patch(states, pending)
        jobs.append(PatchJob(patch, block_id, reliability))
        pending.remove(patch)
        r, c = patch
        region = states[r : r + PATCH, c : c + PATCH]
        region[region == PixelState.LOST] = PixelState.RECONSTRUCTED
    return jobs
