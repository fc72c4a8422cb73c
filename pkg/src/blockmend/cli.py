"""Benchmark harness: corrupt, conceal, measure, report.

Example:

    blockmend --input 'corpus/*.pgm' --pattern dispersed \
        --method skmmse,kmmse --profile efficient --out-dir out

Per image the harness writes the corrupted frame, the loss mask, and one
reconstruction per method, then emits a JSON or CSV report with quality
metrics, per-layer usage, and timing. Reruns with the same configuration
and seed reproduce every non-timing field byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockmendError
from .estimators import Layer
from .image import BlockGrid, ImageBuffer, LossMask, PixelState, apply_mask
from .loss import gen_dispersed_mask, gen_random_mask
from .metrics import psnr, psnr_masked, ssim, usage_fractions
from .netpbm import load_image, load_mask, save_image, save_mask, save_ppm
from .profiles import Profile, conceal_image

REPORT_SCHEMA_VERSION = 1

METHODS = ("brl", "idl", "hql", "kmmse", "skmmse")
_FORCED = {"brl": Layer.BRL, "idl": Layer.IDL, "hql": Layer.HQL}

LAYER_COLORS = {
    "BRL": (255, 0, 0),
    "IDL": (0, 255, 0),
    "HQL": (0, 0, 255),
    None: (255, 0, 255),  # deferred mid-gray fills
}


@dataclass
class RunConfig:
    inputs: list[str]
    pattern: str = "dispersed"  # dispersed | random | mask:<path>
    rate: float = 0.25
    seed: int = 0
    methods: list[str] = field(default_factory=lambda: ["skmmse"])
    profile: str | None = None
    t_phi: float | None = None
    t_nu: float | None = None
    out_dir: str = "out"
    report_format: str = "json"
    psnr_lost_only: bool = False
    layer_map: bool = False
    parallel: bool = False
    timing_strict: bool = False

    def validate(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
        if "skmmse" in self.methods and self.profile is None and self.t_nu is None:
            raise ValueError("method=skmmse requires --profile or custom --t-phi/--t-nu")
        if (self.t_phi is None) != (self.t_nu is None):
            raise ValueError("--t-phi and --t-nu must be given together")
        if not self.pattern.startswith("mask:") and self.pattern not in ("dispersed", "random"):
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if self.report_format not in ("json", "csv"):
            raise ValueError(f"unknown report format {self.report_format!r}")


def _resolve_profile(config: RunConfig) -> Profile:
    if config.t_phi is not None:
        return Profile.custom(config.t_phi, config.t_nu)
    return Profile.named(config.profile)


def _method_runner(method: str, config: RunConfig):
    """Returns (profile, forced_layer, profile_label) for one method name."""
    if method == "skmmse":
        prof = _resolve_profile(config)
        return prof, None, prof.name
    if method == "kmmse":
        return Profile.sentinel(), None, "sentinel"
    return Profile.sentinel(), _FORCED[method], "-"


def _expand_inputs(patterns: list[str]) -> list[str]:
    found: list[str] = []
    for pat in patterns:
        matches = sorted(glob.glob(pat))
        if matches:
            found.extend(matches)
        elif os.path.exists(pat):
            found.append(pat)
    seen = set()
    unique = []
    for path in found:
        if path not in seen:
            seen.add(path)
            unique.append(path)
    return unique


def _make_mask(config: RunConfig, img: ImageBuffer) -> LossMask:
    grid = BlockGrid(img.width, img.height)
    if config.pattern == "dispersed":
        return gen_dispersed_mask(grid)
    if config.pattern == "random":
        return gen_random_mask(grid, config.rate, config.seed)
    mask = load_mask(config.pattern[len("mask:") :])
    if (mask.height, mask.width) != (img.height, img.width):
        raise BlockmendError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    return mask


def emit_layer_map(recon_gray: np.ndarray, mask: LossMask, decisions) -> np.ndarray:
    """Color each reconstructed 2x2 patch by the layer that produced it."""
    if decisions is None:
        raise BlockmendError("no diagnostics retained; cannot draw a layer map")
    rgb = np.repeat(recon_gray[:, :, None], 3, axis=2).astype(np.uint8)
    lost = mask.states == PixelState.LOST
    for d in decisions:
        r, c = d.patch_origin
        color = LAYER_COLORS[None if d.deferred_fill else d.layer.value]
        cells = lost[r : r + 2, c : c + 2]
        for ch in range(3):
            rgb[r : r + 2, c : c + 2, ch][cells] = color[ch]
    return rgb


def _json_value(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def _process_image(path: str, name: str, config: RunConfig) -> list[dict]:
    img = load_image(path)
    mask = _make_mask(config, img)
    corrupted = apply_mask(img, mask)
    save_image(corrupted, os.path.join(config.out_dir, f"{name}.corrupted.pgm"))
    save_mask(mask, os.path.join(config.out_dir, f"{name}.mask.pgm"))
    ref = ImageBuffer(img.quantized())
    lost = mask.states == PixelState.LOST
    multi = len(config.methods) > 1

    rows = []
    for method in config.methods:
        profile, forced, profile_label = _method_runner(method, config)
        recon, report = conceal_image(
            corrupted, mask, profile, forced_layer=forced, parallel_blocks=False
        )
        recon_q = recon.quantized()
        quantized = ImageBuffer(recon_q)
        if config.psnr_lost_only:
            psnr_db = psnr_masked(ref, quantized, lost)
            scope = "lost-only"
        else:
            psnr_db = psnr(ref, quantized)
            scope = "full"
        ssim_score = ssim(ref, quantized)
        tag = f"{name}.{method}" if multi else name
        save_image(quantized, os.path.join(config.out_dir, f"{tag}.recon.pgm"))
        if config.layer_map:
            rgb = emit_layer_map(recon_q, mask, report.decisions)
            save_ppm(rgb, os.path.join(config.out_dir, f"{tag}.layers.ppm"))
        fractions = (
            usage_fractions(report) if sum(report.layer_counts.values()) else
            {k: 0.0 for k in report.layer_counts}
        )
        rows.append(
            {
                "image": name,
                "status": "ok",
                "error": None,
                "method": method,
                "profile": profile_label,
                "t_phi": profile.t_phi if forced is None else None,
                "t_nu": profile.t_nu if forced is None else None,
                "pattern": config.pattern,
                "rate": config.rate if config.pattern == "random" else None,
                "seed": config.seed if config.pattern == "random" else None,
                "psnr_db": psnr_db,
                "ssim": ssim_score,
                "psnr_scope": scope,
                "patches": report.patches,
                "layer_counts": dict(report.layer_counts),
                "layer_fractions": fractions,
                "deferred_fills": report.deferred_fills,
                "mean_patch_ms": report.mean_patch_time() * 1000.0,
                "total_s": report.total_time,
            }
        )
    return rows


def _aggregate(rows: list[dict], methods: list[str]) -> list[dict]:
    out = []
    by_method = {m: [r for r in rows if r["method"] == m and r["status"] == "ok"] for m in methods}
    kmmse_ms = None
    if by_method.get("kmmse"):
        kmmse_ms = float(np.mean([r["mean_patch_ms"] for r in by_method["kmmse"]]))
    for method in methods:
        good = by_method[method]
        if not good:
            continue
        counts = {"BRL": 0, "IDL": 0, "HQL": 0}
        for r in good:
            for k in counts:
                counts[k] += r["layer_counts"][k]
        total = sum(counts.values())
        mean_ms = float(np.mean([r["mean_patch_ms"] for r in good]))
        agg = {
            "method": method,
            "images": len(good),
            "mean_psnr_db": float(np.mean([r["psnr_db"] for r in good])),
            "mean_ssim": float(np.mean([r["ssim"] for r in good])),
            "mean_patch_ms": mean_ms,
            "layer_fractions": {k: (v / total if total else 0.0) for k, v in counts.items()},
            "deferred_fills": sum(r["deferred_fills"] for r in good),
        }
        if kmmse_ms is not None:
            agg["time_vs_kmmse"] = mean_ms / kmmse_ms if kmmse_ms else None
        out.append(agg)
    return out


_CSV_COLUMNS = [
    "row_type", "image", "method", "profile", "t_phi", "t_nu", "pattern", "rate",
    "seed", "status", "error", "psnr_db", "ssim", "psnr_scope", "patches",
    "brl_count", "idl_count", "hql_count", "brl_frac", "idl_frac", "hql_frac",
    "deferred_fills", "mean_patch_ms", "total_s", "images", "mean_psnr_db",
    "mean_ssim", "time_vs_kmmse",
]


def _write_csv(path: str, rows: list[dict], aggregates: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for r in rows:
            flat = {
                "row_type": "image",
                "image": r["image"],
                "method": r["method"],
                "profile": r["profile"],
                "t_phi": r["t_phi"],
                "t_nu": r["t_nu"],
                "pattern": r["pattern"],
                "rate": r["rate"],
                "seed": r["seed"],
                "status": r["status"],
                "error": r["error"],
                "psnr_db": r.get("psnr_db"),
                "ssim": r.get("ssim"),
                "psnr_scope": r.get("psnr_scope"),
                "patches": r.get("patches"),
                "brl_count": r.get("layer_counts", {}).get("BRL"),
                "idl_count": r.get("layer_counts", {}).get("IDL"),
                "hql_count": r.get("layer_counts", {}).get("HQL"),
                "brl_frac": r.get("layer_fractions", {}).get("BRL"),
                "idl_frac": r.get("layer_fractions", {}).get("IDL"),
                "hql_frac": r.get("layer_fractions", {}).get("HQL"),
                "deferred_fills": r.get("deferred_fills"),
                "mean_patch_ms": r.get("mean_patch_ms"),
                "total_s": r.get("total_s"),
            }
            writer.writerow({k: _fmt(flat.get(k)) for k in _CSV_COLUMNS})
        for a in aggregates:
            flat = {
                "row_type": "aggregate",
                "method": a["method"],
                "images": a["images"],
                "mean_psnr_db": a["mean_psnr_db"],
                "mean_ssim": a["mean_ssim"],
                "mean_patch_ms": a["mean_patch_ms"],
                "brl_frac": a["layer_fractions"]["BRL"],
                "idl_frac": a["layer_fractions"]["IDL"],
                "hql_frac": a["layer_fractions"]["HQL"],
                "deferred_fills": a["deferred_fills"],
                "time_vs_kmmse": a.get("time_vs_kmmse"),
            }
            writer.writerow({k: _fmt(flat.get(k)) for k in _CSV_COLUMNS})


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonify(v) for v in obj]
    return _json_value(obj)


def run_benchmark(config: RunConfig) -> int:
    config.validate()
    inputs = _expand_inputs(config.inputs)
    if not inputs:
        print("error: no inputs", file=sys.stderr)
        return 2
    os.makedirs(config.out_dir, exist_ok=True)

    names = []
    used = set()
    for path in inputs:
        stem = os.path.splitext(os.path.basename(path))[0]
        name = stem
        k = 2
        while name in used:
            name = f"{stem}_{k}"
            k += 1
        used.add(name)
        names.append(name)

    rows: list[dict] = []
    failed = False

    def process(path_name):
        path, name = path_name
        try:
            return _process_image(path, name, config)
        except Exception as exc:  # per-image failures land in the report
            return [
                {
                    "image": name,
                    "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                    "method": m,
                    "profile": None,
                    "t_phi": None,
                    "t_nu": None,
                    "pattern": config.pattern,
                    "rate": config.rate if config.pattern == "random" else None,
                    "seed": config.seed if config.pattern == "random" else None,
                }
                for m in config.methods
            ]

    pairs = list(zip(inputs, names))
    if config.parallel and not config.timing_strict and len(pairs) > 1:
        with ThreadPoolExecutor() as pool:
            for result in pool.map(process, pairs):
                rows.extend(result)
    else:
        for pair in pairs:
            rows.extend(process(pair))

    failed = any(r["status"] == "error" for r in rows)
    aggregates = _aggregate(rows, config.methods)

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {
            "pattern": config.pattern,
            "rate": config.rate,
            "seed": config.seed,
            "methods": config.methods,
            "profile": config.profile,
            "t_phi": config.t_phi,
            "t_nu": config.t_nu,
            "psnr_scope": "lost-only" if config.psnr_lost_only else "full",
            "timing_strict": config.timing_strict,
        },
        "images": rows,
        "aggregates": aggregates,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if config.report_format == "json":
        path = os.path.join(config.out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(_jsonify(report), fh, indent=2)
            fh.write("\n")
    else:
        path = os.path.join(config.out_dir, "report.csv")
        _write_csv(path, rows, aggregates)
    print(f"wrote {path} ({len(rows)} rows, {len(aggregates)} aggregates)")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockmend",
        description="Conceal 16x16 block losses in grayscale images and report quality/speed.",
    )
    parser.add_argument("--input", action="append", required=True,
                        help="input image path or glob (PGM P5 or 8-bit gray PNG); repeatable")
    parser.add_argument("--pattern", default="dispersed",
                        help="loss pattern: dispersed, random, or mask:<path> (default dispersed)")
    parser.add_argument("--rate", type=float, default=0.25,
                        help="block loss rate for the random pattern (default 0.25)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the random pattern (default 0)")
    parser.add_argument("--method", default="skmmse",
                        help="comma-separated methods: brl, idl, hql, kmmse, skmmse")
    parser.add_argument("--profile", choices=sorted(("express", "efficient", "excellent")),
                        help="named threshold profile for skmmse")
    parser.add_argument("--t-phi", type=float, dest="t_phi",
                        help="custom flatness threshold (with --t-nu)")
    parser.add_argument("--t-nu", type=float, dest="t_nu",
                        help="custom normalization threshold (with --t-phi)")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--report", choices=("json", "csv"), default="json")
    parser.add_argument("--psnr-lost-only", action="store_true",
                        help="measure PSNR over originally lost pixels only")
    parser.add_argument("--layer-map", action="store_true",
                        help="write a PPM coloring each patch by reconstruction layer")
    parser.add_argument("--parallel", action="store_true",
                        help="process images concurrently")
    parser.add_argument("--timing-strict", action="store_true",
                        help="force sequential processing so timings are undisturbed")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        inputs=args.input,
        pattern=args.pattern,
        rate=args.rate,
        seed=args.seed,
        methods=[m.strip() for m in args.method.split(",") if m.strip()],
        profile=args.profile,
        t_phi=args.t_phi,
        t_nu=args.t_nu,
        out_dir=args.out_dir,
        report_format=args.report,
        psnr_lost_only=args.psnr_lost_only,
        layer_map=args.layer_map,
        parallel=args.parallel,
        timing_strict=args.timing_strict,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_benchmark(config_from_args(args))
    except (BlockmendError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
