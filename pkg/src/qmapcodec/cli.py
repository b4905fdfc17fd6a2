"""Command-line entry point: ``qmc <command> ...``.

Reports are JSON on stdout unless ``--format text`` is given. Exit codes:
0 success, 2 usage, 3 input format, 4 rate errors, 5 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bdm import (
    BitDistributionMap,
    downsample_16,
    load_trace,
    normalize_pair,
    bdm_variance,
    regroup_16,
    render_pgm,
)
from .codec import (
    BLOCK,
    Bitstream,
    CodecConfig,
    ContainerError,
    bits_per_block,
    decode,
    encode_detailed,
    prepare_image,
)
from .entropy import DecodeError
from .gain import GainUnit, RateError, RateTarget, match_rate
from .imagecore import PNMError, crop, format_db, psnr, read_pnm, write_pnm
from .qmap import (
    QualityIndexMap,
    qmap_from_bdm,
    qmap_from_roi,
    qmap_from_variance,
    qmap_rd_optimize,
)
from .synthetic import FIXTURES, make_fixture, roi_mask

log = logging.getLogger("qmapcodec")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_RATE = 4
EXIT_INVARIANT = 5


class InvariantError(RuntimeError):
    """A self-check failed (e.g. decode disagrees with the encoder's reconstruction)."""


class InputError(ValueError):
    """An input file is missing or unreadable."""


# --- helpers -----------------------------------------------------------------


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (path, exc.strerror or exc)) from None


def _read_image(path):
    try:
        return read_pnm(path)
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (path, exc.strerror or exc)) from None


def _read_mask(path):
    img = _read_image(path)
    return img.planes[0]


def _load_qmap(path) -> QualityIndexMap:
    if not Path(path).exists():
        raise InputError("quality map %s does not exist" % path)
    try:
        return QualityIndexMap.load(path)
    except (KeyError, json.JSONDecodeError) as exc:
        raise InputError("bad quality map %s: %s" % (path, exc)) from None


def _load_gain(path):
    return None if path is None else GainUnit.from_json(_read_text(path))


def _config_from_args(args, qmap=None) -> CodecConfig:
    base = {}
    if getattr(args, "config", None):
        base = json.loads(_read_text(args.config))
    opts = dict(
        c_y=base.get("c_y", 16),
        c_uv=base.get("c_uv", 8),
        beta=base.get("beta", 1.0),
        qpred=base.get("qpred", "paper"),
        interp=base.get("interp", "linear"),
        sigma_gain=base.get("sigma_gain", True),
    )
    for key in ("c_y", "c_uv", "beta", "qpred", "interp"):
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    if getattr(args, "no_sigma_gain", False):
        opts["sigma_gain"] = False
    gy = _load_gain(getattr(args, "gain_unit_y", None))
    guv = _load_gain(getattr(args, "gain_unit_uv", None))
    return CodecConfig(qmap=qmap, gain_unit_y=gy, gain_unit_uv=guv, **opts)


def _psnr_report(original, decoded) -> dict:
    ref = crop(prepare_image(original))
    out = crop(decoded)
    return {"psnr_" + n.lower(): format_db(psnr(a, b)) for n, a, b in zip("YUV", ref.planes, out.planes)}


def _encode_report(name, bitstream, psnrs, config, target=None) -> dict:
    row = {
        "name": name,
        "target_bpp": target,
        "bpp": bitstream.bpp,
        "beta": bitstream.beta,
        "bytes": bitstream.total_bits // 8,
        "qmap_overhead": bitstream.qmap_fraction,
        "config_hash": config.digest(),
    }
    row.update(psnrs)
    return row


def _roi_stats(result, mask):
    """bpp inside and outside a block-aligned mask, plus ROI-region PSNR-Y."""
    bdm = bits_per_block(result.ledger)
    pm = np.asarray(mask) != 0
    h, w = result.original.height, result.original.width
    pm = np.pad(pm, ((0, h - pm.shape[0]), (0, w - pm.shape[1])), mode="edge")
    cells = pm.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).sum(axis=(1, 3)) * 2 >= BLOCK * BLOCK
    roi_px = cells.sum() * BLOCK * BLOCK
    bg_px = (~cells).sum() * BLOCK * BLOCK
    ref = result.original.planes[0]
    rec = result.reconstruction.planes[0]
    pix = np.repeat(np.repeat(cells, BLOCK, axis=0), BLOCK, axis=1)
    return {
        "roi_bpp": float(bdm.values[cells].sum() / roi_px) if roi_px else None,
        "background_bpp": float(bdm.values[~cells].sum() / bg_px) if bg_px else None,
        "roi_psnr_y": format_db(psnr(ref[pix], rec[pix])) if roi_px else None,
    }


def _emit(report, fmt, out=None):
    if fmt == "text":
        text = _text_table(report)
    else:
        text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _fmt_cell(v):
    if isinstance(v, float):
        return "%.4f" % v
    return str(v)


def _text_table(report):
    rows = report.get("rows") if isinstance(report, dict) else None
    if rows:
        keys = list(rows[0].keys())
        widths = [max(len(k), *(len(_fmt_cell(r.get(k))) for r in rows)) for k in keys]
        lines = ["  ".join(k.ljust(w) for k, w in zip(keys, widths))]
        for r in rows:
            lines.append("  ".join(_fmt_cell(r.get(k)).ljust(w) for k, w in zip(keys, widths)))
        extra = {k: v for k, v in report.items() if k != "rows"}
        lines.extend("%s: %s" % (k, _fmt_cell(v)) for k, v in sorted(extra.items()))
        return "\n".join(lines)
    return "\n".join("%s: %s" % (k, _fmt_cell(v)) for k, v in sorted(report.items()))


# --- commands ----------------------------------------------------------------


def cmd_encode(args):
    image = _read_image(args.input)
    qmap = _load_qmap(args.qmap) if args.qmap else None
    config = _config_from_args(args, qmap)
    if args.target_bpp is not None:
        match = match_rate(image, config, RateTarget(args.target_bpp, args.tolerance))
        config = replace(config, beta=match.beta)
    result = encode_detailed(image, config)
    data = result.bitstream.to_bytes()
    Path(args.output).write_bytes(data)
    decoded = decode(data, config.gain_unit_y, config.gain_unit_uv)
    if not all(np.array_equal(a, b) for a, b in zip(crop(result.reconstruction).planes, decoded.planes)):
        raise InvariantError("decoder output differs from the encoder's reconstruction")
    report = _encode_report(Path(args.input).name, result.bitstream, _psnr_report(image, decoded), config, args.target_bpp)
    _emit(report, args.format, args.report)


def cmd_decode(args):
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (args.input, exc.strerror)) from None
    img = decode(data, _load_gain(args.gain_unit_y), _load_gain(args.gain_unit_uv))
    write_pnm(args.output, img)
    _emit({"output": str(args.output), "width": img.width, "height": img.height}, args.format)


def cmd_inspect(args):
    data = Path(args.input).read_bytes()
    bs = Bitstream.from_bytes(data)
    report = {
        "width": bs.width,
        "height": bs.height,
        "orig_width": bs.orig_width,
        "orig_height": bs.orig_height,
        "c_y": bs.c_y,
        "c_uv": bs.c_uv,
        "beta": bs.beta,
        "flags": bs.flags,
        "header_bits": 8 * Bitstream.HEADER_BYTES,
        "segment_bits": bs.segment_bits(),
        "total_bits": bs.total_bits,
        "bpp": bs.bpp,
        "qmap_overhead": bs.qmap_fraction,
    }
    _emit(report, args.format)


def cmd_bdm_from_trace(args):
    records, w, h = load_trace(args.trace)
    bdm = regroup_16(records, (w, h))
    if args.out:
        _save_bdm(bdm, args.out, native=BitDistributionMap.from_records(records, w, h) if args.native else None)
    _emit({"width": w, "height": h, "records": len(records), "total_bits": bdm.total(),
           "max": float(bdm.values.max()), "variance_normalized": _self_normalized_variance(bdm)}, args.format)


def _self_normalized_variance(bdm):
    upper = float(bdm.values.max())
    return bdm_variance(bdm.values / upper) if upper > 0 else 0.0


def _save_bdm(bdm, out, native=None):
    out = Path(out)
    if out.suffix.lower() in (".pgm", ".pnm"):
        write_pnm(out, render_pgm(native if native is not None else bdm))
    else:
        out.write_text(bdm.to_json())


def cmd_bdm_from_encode(args):
    image = _read_image(args.input)
    qmap = _load_qmap(args.qmap) if args.qmap else None
    config = _config_from_args(args, qmap)
    result = encode_detailed(image, config)
    bdm = bits_per_block(result.ledger)
    if args.out:
        _save_bdm(bdm, args.out)
    _emit({"bpp": result.bitstream.bpp, "luma_bits": bdm.total(), "max": float(bdm.values.max()),
           "variance_normalized": _self_normalized_variance(bdm), "config_hash": config.digest()}, args.format)


def cmd_bdm_compare(args):
    a = BitDistributionMap.from_json(_read_text(args.a))
    b = BitDistributionMap.from_json(_read_text(args.b))
    na, nb, upper = normalize_pair(a, b)
    _emit({"upper": upper, "variance_a": bdm_variance(na), "variance_b": bdm_variance(nb)}, args.format)


def _write_qmap(qmap, out, fmt):
    if out:
        qmap.save(out)
    _emit({"h": qmap.rows, "w": qmap.cols, "min": int(qmap.q.min()), "max": int(qmap.q.max()),
           "output": out} if out else json.loads(qmap.to_json()), fmt)


def cmd_qmap_from_bdm(args):
    bdm = BitDistributionMap.from_json(_read_text(args.bdm))
    _write_qmap(qmap_from_bdm(downsample_16(bdm)), args.out, args.format)


def cmd_qmap_from_roi(args):
    mask = _read_mask(args.mask)
    h, w = mask.shape
    hp, wp = -(-h // 32) * 32, -(-w // 32) * 32
    mask = np.pad(mask, ((0, hp - h), (0, wp - w)), mode="edge")
    _write_qmap(qmap_from_roi(mask, args.hi, args.lo), args.out, args.format)


def cmd_qmap_from_variance(args):
    prepared = prepare_image(_read_image(args.input))
    qmap = qmap_from_variance(prepared.planes[0], args.levels, (args.lo, args.hi))
    _write_qmap(qmap, args.out, args.format)


def cmd_qmap_rd(args):
    image = _read_image(args.input)
    config = _config_from_args(args)
    candidates = [int(c) for c in args.candidates.split(",")]
    qmap = qmap_rd_optimize(image, config, args.lam, candidates)
    _write_qmap(qmap, args.out, args.format)


def cmd_rate_match(args):
    image = _read_image(args.input)
    qmap = _load_qmap(args.qmap) if args.qmap else None
    config = _config_from_args(args, qmap)
    match = match_rate(image, config, RateTarget(args.target_bpp, args.tolerance, args.max_iterations))
    if args.output:
        Path(args.output).write_bytes(match.bitstream.to_bytes())
    _emit({"target_bpp": args.target_bpp, "beta": match.beta, "bpp": match.bpp,
           "trials": [list(t) for t in match.trials], "config_hash": config.digest()}, args.format)


# experiments


def roi_experiment(image, mask, config: CodecConfig, hi: int = 6, lo: int = -6) -> dict:
    """Uniform Q=0 run against a ROI-map run at the same beta."""
    prepared = prepare_image(image)
    h, w = prepared.height, prepared.width
    mask = np.asarray(mask)
    if mask.shape != (image.height, image.width) and mask.shape != (h, w):
        raise ValueError("mask %r does not match the %dx%d image" % (mask.shape, image.width, image.height))
    mask = np.pad(mask, ((0, h - mask.shape[0]), (0, w - mask.shape[1])), mode="edge")
    qmap = qmap_from_roi(mask, hi, lo)
    rows = []
    for label, cfg in (("uniform", config), ("roi", replace(config, qmap=qmap))):
        result = encode_detailed(prepared, cfg)
        row = {"run": label, "bpp": result.bitstream.bpp,
               "psnr_y": format_db(psnr(crop(result.original).planes[0], crop(result.reconstruction).planes[0])),
               "qmap_overhead": result.bitstream.qmap_fraction, "config_hash": cfg.digest()}
        row.update(_roi_stats(result, mask))
        rows.append(row)
    return {"rows": rows, "savings": 1.0 - rows[1]["bpp"] / rows[0]["bpp"]}


def vvc_qmap_experiment(image, records, dims, target_bpp: float, config: CodecConfig, tolerance: float = 0.10) -> dict:
    """Map from an external trace, compared with the map-free codec at a matched rate.

    Rate is matched without the map first; the mapped run reuses that beta and
    only re-matches if its own rate falls outside the tolerance.
    """
    prepared = prepare_image(image)
    if tuple(dims) != (image.width, image.height) and tuple(dims) != (prepared.width, prepared.height):
        raise ValueError("trace is %dx%d, image is %dx%d" % (dims[0], dims[1], image.width, image.height))
    bdm = regroup_16(records, dims)
    values = bdm.values
    grid = (prepared.height // BLOCK, prepared.width // BLOCK)
    if values.shape != grid:
        values = np.pad(values, ((0, grid[0] - values.shape[0]), (0, grid[1] - values.shape[1])), mode="edge")
        bdm = BitDistributionMap.uniform(values, prepared.width, prepared.height)
    qmap = qmap_from_bdm(downsample_16(bdm, grid))
    target = RateTarget(target_bpp, tolerance)
    base = match_rate(prepared, config, target)
    mapped_cfg = replace(config, qmap=qmap, beta=base.beta)
    result = encode_detailed(prepared, mapped_cfg)
    if not target.accepts(result.bitstream.bpp):
        result = encode_detailed(prepared, replace(mapped_cfg, beta=match_rate(prepared, mapped_cfg, target).beta))
    base_result = encode_detailed(prepared, replace(config, beta=base.beta))
    rows = []
    for label, res in (("codec", base_result), ("codec+qmap", result)):
        p = psnr(crop(res.original).planes[0], crop(res.reconstruction).planes[0])
        rows.append({"run": label, "target_bpp": target_bpp, "bpp": res.bitstream.bpp, "beta": res.bitstream.beta,
                     "psnr_y": format_db(p), "qmap_overhead": res.bitstream.qmap_fraction})
    p0 = psnr(crop(base_result.original).planes[0], crop(base_result.reconstruction).planes[0])
    p1 = psnr(crop(result.original).planes[0], crop(result.reconstruction).planes[0])
    delta = 0.0 if p0 == p1 else p1 - p0
    return {"rows": rows, "delta_psnr_y": format_db(delta),
            "delta_bpp": rows[1]["bpp"] - rows[0]["bpp"], "qmap_levels": sorted(set(qmap.q.reshape(-1).tolist())),
            "config_hash": config.digest()}


def overhead_report(image, qmap: QualityIndexMap, config: CodecConfig) -> dict:
    result = encode_detailed(image, replace(config, qmap=qmap))
    bs = result.bitstream
    return {"qmap_bits": 8 * len(bs.segments["qmap"]), "total_bits": bs.total_bits,
            "fraction": bs.qmap_fraction, "bpp": bs.bpp, "config_hash": config.digest()}


def cmd_experiment_roi(args):
    image = _read_image(args.input)
    mask = _read_mask(args.mask)
    _emit(roi_experiment(image, mask, _config_from_args(args), args.hi, args.lo), args.format, args.report)


def cmd_experiment_vvc(args):
    image = _read_image(args.input)
    if not Path(args.trace).exists():
        raise InputError("trace file %s does not exist" % args.trace)
    records, w, h = load_trace(args.trace)
    report = vvc_qmap_experiment(image, records, (w, h), args.target_bpp, _config_from_args(args), args.tolerance)
    _emit(report, args.format, args.report)


def cmd_experiment_overhead(args):
    image = _read_image(args.input)
    config = _config_from_args(args)
    if args.qmap:
        qmap = _load_qmap(args.qmap)
    else:
        qmap = qmap_from_variance(prepare_image(image).planes[0])
    if args.target_bpp is not None:
        match = match_rate(image, replace(config, qmap=qmap), RateTarget(args.target_bpp))
        config = replace(config, beta=match.beta)
    _emit(overhead_report(image, qmap, config), args.format, args.report)


def cmd_synth(args):
    img = make_fixture(args.name, args.width, args.height, args.seed)
    write_pnm(args.output, img)
    if args.mask:
        write_pnm(args.mask, roi_mask(args.width, args.height))
    _emit({"output": str(args.output), "fixture": args.name, "width": args.width, "height": args.height}, args.format)


# --- parser --------------------------------------------------------------------


def _codec_flags(p, beta=True):
    p.add_argument("--config", help="JSON file mirroring CodecConfig fields")
    if beta:
        p.add_argument("--beta", type=float, help="rate-distortion trade-off (default 1.0)")
    p.add_argument("--c-y", dest="c_y", type=int, help="luma latent channels (default 16)")
    p.add_argument("--c-uv", dest="c_uv", type=int, help="chroma latent channels per plane (default 8)")
    p.add_argument("--qpred", choices=("paper", "avg"), help="quality map predictor")
    p.add_argument("--interp", choices=("linear", "paper-literal"), help="gain interpolation mode")
    p.add_argument("--no-sigma-gain", action="store_true", help="do not scale sigma by the gain vector")
    p.add_argument("--gain-unit-y", help="custom luma gain unit (JSON)")
    p.add_argument("--gain-unit-uv", help="custom chroma gain unit (JSON)")


def _out_flags(p, report=True):
    p.add_argument("--format", choices=("json", "text"), default="json")
    if report:
        p.add_argument("--report", help="also write the report to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmc", description="Spatial quality map codec toolkit.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a PNM image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--target-bpp", type=float, help="match this rate instead of using --beta")
    p.add_argument("--tolerance", type=float, default=0.10)
    p.add_argument("--qmap", help="quality map (.json or .pgm)")
    _codec_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a container to PPM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--gain-unit-y")
    p.add_argument("--gain-unit-uv")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inspect", help="print container header and segment sizes")
    p.add_argument("--in", dest="input", required=True)
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_inspect)

    bdm = sub.add_parser("bdm", help="bit distribution maps").add_subparsers(dest="bdm_command", required=True)
    p = bdm.add_parser("from-trace", help="regroup an encoder trace to 16x16 blocks")
    p.add_argument("trace")
    p.add_argument("--out", help=".json map or .pgm rendering")
    p.add_argument("--native", action="store_true", help="render the native block partition")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_bdm_from_trace)
    p = bdm.add_parser("from-encode", help="luma bit map of this codec for an image")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--qmap")
    _codec_flags(p)
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_bdm_from_encode)
    p = bdm.add_parser("compare", help="normalise two maps jointly and report variances")
    p.add_argument("a")
    p.add_argument("b")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_bdm_compare)

    qm = sub.add_parser("qmap", help="quality map generation").add_subparsers(dest="qmap_command", required=True)
    p = qm.add_parser("from-bdm", help="five-level map from a 16x16 bit map or trace")
    p.add_argument("bdm")
    p.add_argument("--out")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_qmap_from_bdm)
    p = qm.add_parser("from-roi", help="two-level map from a mask image")
    p.add_argument("mask")
    p.add_argument("--hi", type=int, default=6)
    p.add_argument("--lo", type=int, default=-6)
    p.add_argument("--out")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_qmap_from_roi)
    p = qm.add_parser("from-variance", help="map from per-block luma variance")
    p.add_argument("input")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--lo", type=int, default=-4)
    p.add_argument("--hi", type=int, default=0)
    p.add_argument("--out")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_qmap_from_variance)
    p = qm.add_parser("rd", help="per-block rate-distortion optimised map")
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="weight of SSE against bits")
    p.add_argument("--candidates", default="-8,-4,0,4,8", help="comma list; write --candidates=-4,0,4 when it starts with a minus")
    p.add_argument("--out")
    _codec_flags(p)
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_qmap_rd)

    p = sub.add_parser("rate-match", help="search beta for a target bpp")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target-bpp", type=float, required=True)
    p.add_argument("--tolerance", type=float, default=0.10)
    p.add_argument("--max-iterations", type=int, default=20)
    p.add_argument("--qmap")
    p.add_argument("--out", dest="output")
    _codec_flags(p, beta=False)
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_rate_match)

    ex = sub.add_parser("experiment", help="reproduction protocols").add_subparsers(dest="experiment", required=True)
    p = ex.add_parser("roi", help="uniform map against a ROI map at equal beta")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--hi", type=int, default=6)
    p.add_argument("--lo", type=int, default=-6)
    _codec_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_experiment_roi)
    p = ex.add_parser("vvc-qmap", help="trace-derived map at a matched rate")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--target-bpp", type=float, required=True)
    p.add_argument("--tolerance", type=float, default=0.10)
    _codec_flags(p, beta=False)
    _out_flags(p)
    p.set_defaults(func=cmd_experiment_vvc)
    p = ex.add_parser("overhead", help="share of bits spent on the quality map")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--qmap", help="defaults to the five-level variance map")
    p.add_argument("--target-bpp", type=float)
    _codec_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_experiment_overhead)

    p = sub.add_parser("synth", help="write a synthetic fixture image")
    p.add_argument("name", choices=FIXTURES)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask", help="also write the centred ROI mask")
    _out_flags(p, report=False)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except RateError as exc:
        print("rate error: %s" % exc, file=sys.stderr)
        return EXIT_RATE
    except InvariantError as exc:
        print("invariant breach: %s" % exc, file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, PNMError, ContainerError, DecodeError, json.JSONDecodeError, FileNotFoundError) as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_FORMAT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
