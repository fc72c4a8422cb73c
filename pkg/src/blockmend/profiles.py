"""Layer switching, reconstruction profiles, and the concealment driver.

Per patch the selection is sequential: a flat context (dynamic range
phi <= T_phi) takes the basic layer outright; otherwise the support area
grows ring by ring while the cumulative sum of raw exponential weights
(nu) is tracked, and the intermediate layer fires as soon as nu reaches
T_nu. Only when the support depletes first does the full kernel-MMSE
pipeline run on everything gathered.

The named profiles trade quality against speed purely through (T_phi,
T_nu); sentinel thresholds (T_phi < 0, T_nu = inf) disable both early
exits, which makes the driver equivalent to running the full pipeline on
every patch.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import framework
from .errors import EmptyContextError, WeightUnderflowError
from .estimators import (
    DEFAULT_SIGMA2,
    Layer,
    PatchEstimate,
    brl_estimate,
    hql_estimate,
    idl_estimate,
    raw_idl_weights,
)
from .framework import TargetContext, extract_target
from .image import BLOCK_SIZE, ImageBuffer, LossMask, PixelState, require_same_shape
from .metrics import ConcealmentReport

PROFILE_TABLE = {
    "express": (20.0, 0.01),
    "efficient": (20.0, 0.1),
    "excellent": (20.0, 100.0),
}

DEFERRED_FILL_VALUE = 128.0


@dataclass(frozen=True)
class Profile:
    """Threshold pair controlling layer selection."""

    name: str
    t_phi: float
    t_nu: float

    def __post_init__(self):
        if not self.t_nu > 0.0:
            raise ValueError(f"T_nu must be positive, got {self.t_nu}")

    @classmethod
    def named(cls, name: str) -> "Profile":
        try:
            t_phi, t_nu = PROFILE_TABLE[name]
        except KeyError:
            raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILE_TABLE)}")
        return cls(name, t_phi, t_nu)

    @classmethod
    def custom(cls, t_phi: float, t_nu: float) -> "Profile":
        if t_phi < 0.0:
            raise ValueError(f"T_phi must be non-negative, got {t_phi}")
        return cls("custom", t_phi, t_nu)

    @classmethod
    def sentinel(cls) -> "Profile":
        """Thresholds that force the full pipeline on every patch."""
        return cls("custom", -1.0, math.inf)


@dataclass
class LayerDecision:
    """Outcome of the layer selection for one patch (plus diagnostics)."""

    patch_origin: tuple[int, int]
    layer: Layer | None  # None only for deferred mid-gray fills
    phi: float | None
    nu: float | None
    rings_used: int
    m_candidates: int | None = None
    beta: float | None = None
    alpha: float | None = None
    elapsed_s: float = 0.0
    fallback: bool = False
    deferred_fill: bool = False


def flatness(target: TargetContext) -> float:
    """Dynamic range of the usable context."""
    if target.n_y < 1:
        raise EmptyContextError("flatness needs at least one context sample")
    return float(target.y0.max() - target.y0.min())


def select_and_estimate(
    img, mask, target: TargetContext, profile: Profile, sigma2: float = DEFAULT_SIGMA2
) -> PatchEstimate:
    """Pick and run the cheapest suitable layer for one patch."""
    start = time.perf_counter()
    phi = flatness(target)
    if phi <= profile.t_phi:
        est = brl_estimate(target)
        est.diagnostics.rings_used = 0
    else:
        emap = framework.build_expansion_map(_shape(mask), target.patch_origin)
        cset = framework.empty_candidate_set(target, emap)
        nu = 0.0
        while nu < profile.t_nu and not cset.exhausted:
            prev_m = cset.m_current
            cset = framework.expand_support(img, mask, target, emap, cset)
            if cset.m_current > prev_m:
                nu += float(raw_idl_weights(target.y0, cset.y[prev_m:], sigma2).sum())
        if nu >= profile.t_nu:
            est = idl_estimate(target, cset, sigma2)
        else:
            est = hql_estimate(target, cset, sigma2)
            if est.layer is not Layer.HQL:
                est.diagnostics.fallback = True
        est.diagnostics.nu = nu
        est.diagnostics.rings_used = cset.ring_index
    est.diagnostics.phi = phi
    est.diagnostics.elapsed_s = time.perf_counter() - start
    return est


def _shape(mask) -> tuple[int, int]:
    states = mask.states if isinstance(mask, LossMask) else mask
    return states.shape


def _forced_estimate(img, states, target: TargetContext, layer: Layer, sigma2: float) -> PatchEstimate:
    """Run one fixed layer (with the usual degradation ladder)."""
    start = time.perf_counter()
    phi = flatness(target)
    if layer is Layer.BRL:
        est = brl_estimate(target)
        est.diagnostics.rings_used = 0
    else:
        emap = framework.build_expansion_map(states.shape, target.patch_origin)
        if emap.max_ring > 0:
            cset = framework.gather_candidates(img, states, target, emap, emap.max_ring)
        else:
            cset = framework.empty_candidate_set(target, emap)
        if layer is Layer.HQL:
            est = hql_estimate(target, cset, sigma2)
            if est.layer is not Layer.HQL:
                est.diagnostics.fallback = True
        else:
            if cset.m_current >= 1:
                try:
                    est = idl_estimate(target, cset, sigma2)
                except WeightUnderflowError:
                    est = brl_estimate(target)
                    est.diagnostics.fallback = True
            else:
                est = brl_estimate(target)
                est.diagnostics.fallback = True
        est.diagnostics.rings_used = cset.ring_index
    est.diagnostics.phi = phi
    est.diagnostics.elapsed_s = time.perf_counter() - start
    return est


def _decision_from(est: PatchEstimate, patch_origin) -> LayerDecision:
    d = est.diagnostics
    bw = d.bandwidth
    return LayerDecision(
        patch_origin=patch_origin,
        layer=est.layer,
        phi=d.phi,
        nu=d.nu,
        rings_used=d.rings_used or 0,
        m_candidates=d.m_candidates,
        beta=bw.beta if bw else None,
        alpha=bw.alpha if bw else None,
        elapsed_s=d.elapsed_s or 0.0,
        fallback=d.fallback,
    )


def _conceal_block(work, states, block_origin, profile, sigma2, forced_layer) -> list[LayerDecision]:
    decisions: list[LayerDecision] = []
    remaining = framework.lost_patch_origins(states, block_origin)
    while remaining:
        deferred: list[tuple[int, int]] = []
        progressed = False
        pending = list(remaining)
        while pending:
            patch, _reliability = framework.pick_next_patch(states, pending)
            pending.remove(patch)
            started = time.perf_counter()
            try:
                target = extract_target(work, states, patch)
            except EmptyContextError:
                deferred.append(patch)
                continue
            if forced_layer is None:
                est = select_and_estimate(work, states, target, profile, sigma2)
            else:
                est = _forced_estimate(work, states, target, forced_layer, sigma2)
            est.diagnostics.elapsed_s = time.perf_counter() - started
            _write_patch(work, states, patch, est.values)
            decisions.append(_decision_from(est, patch))
            progressed = True
        if not deferred:
            break
        if progressed:
            remaining = deferred
        else:
            for patch in deferred:
                _write_patch(work, states, patch, np.full(4, DEFERRED_FILL_VALUE))
                decisions.append(
                    LayerDecision(patch, None, None, None, 0, deferred_fill=True)
                )
            break
    return decisions


def _write_patch(work, states, patch_origin, values) -> None:
    r, c = patch_origin
    vals = np.asarray(values, dtype=np.float64).reshape(2, 2)
    region = states[r : r + 2, c : c + 2]
    lost = region == PixelState.LOST
    work[r : r + 2, c : c + 2][lost] = vals[lost]
    region[lost] = PixelState.RECONSTRUCTED


def _lost_block_ids(states) -> list[tuple[int, int]]:
    from .image import BlockGrid

    grid = BlockGrid(states.shape[1], states.shape[0])
    out = []
    for br in range(grid.rows):
        for bc in range(grid.cols):
            r, c = br * BLOCK_SIZE, bc * BLOCK_SIZE
            if (states[r : r + BLOCK_SIZE, c : c + BLOCK_SIZE] == PixelState.LOST).any():
                out.append((br, bc))
    return out


def _blocks_support_isolated(block_ids) -> bool:
    # parallel processing is safe only when no lost block sits in another's
    # 3x3 block neighbourhood
    idset = set(block_ids)
    for br, bc in block_ids:
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if (dr or dc) and (br + dr, bc + dc) in idset:
                    return False
    return True


def conceal_image(
    img: ImageBuffer,
    mask: LossMask,
    profile: Profile,
    *,
    sigma2: float = DEFAULT_SIGMA2,
    forced_layer: Layer | None = None,
    parallel_blocks: bool = False,
) -> tuple[ImageBuffer, ConcealmentReport]:
    """Reconstruct every lost pixel; returns the result and a run report.

    Lost blocks are processed in raster order (earlier reconstructions feed
    later blocks as usable support). With ``parallel_blocks`` and a
    support-isolated loss pattern the blocks run concurrently, which is
    bit-identical to the serial order by construction.
    """
    require_same_shape(img.pixels, mask.states)
    work = img.pixels.copy()
    states = mask.states.copy()
    t0 = time.perf_counter()
    block_ids = _lost_block_ids(states)

    if parallel_blocks and len(block_ids) > 1 and _blocks_support_isolated(block_ids):
        per_block: dict[tuple[int, int], list[LayerDecision]] = {}
        origins = {bid: (bid[0] * BLOCK_SIZE, bid[1] * BLOCK_SIZE) for bid in block_ids}
        with ThreadPoolExecutor() as pool:
            futures = {
                bid: pool.submit(
                    _conceal_block, work, states, origins[bid], profile, sigma2, forced_layer
                )
                for bid in block_ids
            }
            for bid, fut in futures.items():
                per_block[bid] = fut.result()
        decisions = [d for bid in block_ids for d in per_block[bid]]
    else:
        decisions = []
        for bid in block_ids:
            origin = (bid[0] * BLOCK_SIZE, bid[1] * BLOCK_SIZE)
            decisions.extend(_conceal_block(work, states, origin, profile, sigma2, forced_layer))

    total = time.perf_counter() - t0
    assert not (states == PixelState.LOST).any(), "concealment left LOST pixels behind"

    layer_counts = {layer.value: 0 for layer in Layer}
    deferred = 0
    times = []
    for d in decisions:
        if d.deferred_fill:
            deferred += 1
        else:
            layer_counts[d.layer.value] += 1
            times.append(d.elapsed_s)
    report = ConcealmentReport(
        layer_counts=layer_counts,
        patch_times=times,
        total_time=total,
        deferred_fills=deferred,
        decisions=decisions,
    )
    return ImageBuffer(work), report


def audit_decisions(decisions, profile: Profile) -> list[str]:
    """Check every recorded decision against its defining predicate."""
    problems = []
    for d in decisions:
        if d.deferred_fill:
            continue
        if d.fallback:
            continue  # fallback path is recorded, predicate does not apply
        if d.layer is Layer.BRL and not d.phi <= profile.t_phi:
            problems.append(f"{d.patch_origin}: BRL with phi={d.phi} > {profile.t_phi}")
        elif d.layer is Layer.IDL and not d.nu >= profile.t_nu:
            problems.append(f"{d.patch_origin}: IDL with nu={d.nu} < {profile.t_nu}")
        elif d.layer is Layer.HQL and not (d.phi > profile.t_phi and d.nu < profile.t_nu):
            problems.append(f"{d.patch_origin}: HQL with phi={d.phi}, nu={d.nu}")
    return problems
