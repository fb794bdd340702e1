"""Command-line pipeline: segment, ocr, cluster, synth, train, eval, serve.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 pipeline failure.
Every subcommand is deterministic for fixed inputs and --seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluate as eval_mod
from .matching import cluster, clustering_to_dict, normalize
from .outlines import trace_graph
from .raster import (
    BinaryImage,
    ImageReadError,
    UnsupportedFormatError,
    binarize_otsu,
    load_image,
    save_pgm,
    save_png,
)
from .segmentation import (
    SegParams,
    crop_line,
    extract_blobs,
    render_overlay,
    segment_page,
    segmentation_json,
    validate_seg_params,
)
from .sequence import (
    Alphabet,
    InfeasibleLabelError,
    TrainingDivergedError,
    decode_best_path,
    init_model,
    load_checkpoint,
    make_frames,
    save_checkpoint,
    train_toy,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PIPELINE = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_params(args) -> SegParams:
    doc = {}
    if getattr(args, "params", None):
        try:
            doc = json.loads(Path(args.params).read_text())
        except OSError as e:
            raise CliError(f"cannot read params file: {e}", EXIT_IO)
        except json.JSONDecodeError as e:
            raise CliError(f"bad params JSON: {e}", EXIT_USAGE)
    for key in ("connectivity", "small_blob_area", "line_gap", "reading_order"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    errors = validate_seg_params(doc)
    if errors:
        msg = "; ".join(f"{k}: {v}" for k, v in sorted(errors.items()))
        raise CliError(f"bad segmentation params: {msg}", EXIT_USAGE)
    return SegParams(**doc)


def _load_binary(path) -> BinaryImage:
    try:
        gray = load_image(path)
    except (ImageReadError, UnsupportedFormatError) as e:
        raise CliError(str(e), EXIT_IO)
    binary, _ = binarize_otsu(gray)
    return binary


def _add_param_flags(sp) -> None:
    sp.add_argument("--params", help="segmentation params JSON file")
    sp.add_argument("--connectivity", type=int, choices=(4, 8))
    sp.add_argument("--small-blob-area", type=int, dest="small_blob_area")
    sp.add_argument("--line-gap", type=int, dest="line_gap")
    sp.add_argument("--reading-order", choices=("ltr", "rtl"), dest="reading_order")


def cmd_segment(args) -> int:
    params = _load_params(args)
    binary = _load_binary(args.input)
    seg = segment_page(binary, params)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "seg.json").write_text(segmentation_json(seg))
        save_png(out / "overlay.png", render_overlay(binary, seg))
    except OSError as e:
        raise CliError(f"cannot write outputs: {e}", EXIT_IO)
    return EXIT_OK


def _fit_height(img: BinaryImage, height: int) -> BinaryImage:
    if img.height == height:
        return img
    fg = img.foreground
    if img.height > height:
        top = (img.height - height) // 2
        return BinaryImage(fg[top : top + height].copy())
    pad_top = (height - img.height) // 2
    out = np.zeros((height, img.width), dtype=bool)
    out[pad_top : pad_top + img.height] = fg
    return BinaryImage(out)


def cmd_ocr(args) -> int:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise CliError(f"cannot read config: {e}", EXIT_IO)
        except json.JSONDecodeError as e:
            raise CliError(f"bad config JSON: {e}", EXIT_USAGE)
    checkpoint = args.checkpoint or cfg.get("checkpoint")
    atlas_dir = args.atlas or cfg.get("atlas")
    if not checkpoint or not atlas_dir:
        raise CliError("ocr needs --checkpoint and --atlas (or a config file)", EXIT_USAGE)
    seg_doc = dict(cfg.get("seg", {}))
    for key in ("connectivity", "small_blob_area", "line_gap", "reading_order"):
        value = getattr(args, key, None)
        if value is not None:
            seg_doc[key] = value
    errors = validate_seg_params(seg_doc)
    if errors:
        raise CliError("bad segmentation params in config", EXIT_USAGE)
    params = SegParams(**seg_doc)

    for p in (checkpoint, atlas_dir, args.input):
        if not Path(p).exists():
            raise CliError(f"missing input: {p}", EXIT_IO)
    try:
        model = load_checkpoint(checkpoint)
        gs = corpus_mod.load_atlas(atlas_dir)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot load model/atlas: {e}", EXIT_IO)
    except ValueError as e:
        raise CliError(str(e), EXIT_PIPELINE)
    n_symbols = len(gs.symbol_ids)
    if model.alphabet_size != n_symbols:
        raise CliError(
            f"checkpoint expects {model.alphabet_size} symbols, atlas has {n_symbols}",
            EXIT_PIPELINE,
        )

    binary = _load_binary(args.input)
    seg = segment_page(binary, params)
    transcripts: list[str] = []
    id_lines: list[list[int]] = []
    for line in seg.lines:
        crop = crop_line(binary, line, seg.blobs, margin=0)
        crop = _fit_height(crop, model.frame_height)
        frames = make_frames(crop, model.frame_width, params.reading_order)
        ids = decode_best_path(model.forward(frames))
        id_lines.append(ids)
        transcripts.append("".join(gs.chars.get(i, "?") for i in ids))
    for text in transcripts:
        print(text)
    if args.refs:
        try:
            refs = Path(args.refs).read_text().splitlines()
        except OSError as e:
            raise CliError(f"cannot read refs: {e}", EXIT_IO)
        eq = eval_mod.load_equivalence(args.eq_map) if args.eq_map else None
        if len(refs) != len(transcripts):
            raise CliError(
                f"{len(refs)} reference lines vs {len(transcripts)} transcript lines",
                EXIT_PIPELINE,
            )
        total_dist = 0
        total_len = 0
        for i, (ref, hyp) in enumerate(zip(refs, transcripts)):
            dist = eval_mod.edit_distance(ref, hyp, eq)
            total_dist += dist
            total_len += len(ref)
            print(f"# line {i} dist {dist} ref_len {len(ref)}")
        rate = total_dist / total_len if total_len else 0.0
        print(f"# cer {rate:.6f}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    items = []
    for path in args.images:
        binary = _load_binary(path)
        blobs = extract_blobs(binary, 8)
        if not blobs:
            raise CliError(f"no foreground in {path}", EXIT_PIPELINE)
        big = max(blobs, key=lambda b: b.area)
        items.append(normalize(trace_graph(big).outer(), args.samples))
    result = cluster(items, args.threshold, starts=args.starts)
    doc = clustering_to_dict(result)
    doc["ids"] = [Path(p).stem for p in args.images]
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            raise CliError(f"cannot write {args.out}: {e}", EXIT_IO)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    atlas_dir = Path(args.atlas)
    if args.demo and not (atlas_dir / "atlas.json").exists():
        corpus_mod.save_atlas(atlas_dir, corpus_mod.make_demo_glyph_set())
    try:
        gs = corpus_mod.load_atlas(atlas_dir)
    except OSError as e:
        raise CliError(f"cannot load atlas: {e}", EXIT_IO)
    extras = []
    if args.extra_trigrams:
        try:
            extras = [tuple(t) for t in json.loads(Path(args.extra_trigrams).read_text())]
        except OSError as e:
            raise CliError(f"cannot read extra trigrams: {e}", EXIT_IO)
    try:
        plan = corpus_mod.build_plan(gs, extras)
    except ValueError as e:
        raise CliError(str(e), EXIT_PIPELINE)
    texts = [list(s) for s in plan.strings]
    rng = np.random.default_rng(args.seed)
    for _ in range(args.lines):
        texts.append(corpus_mod.random_line_text(gs, rng, args.min_len, args.max_len))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        records = []
        for i, text in enumerate(texts):
            seed = args.seed ^ i
            img, label = corpus_mod.synthesize_line(gs, text, seed=seed, salt_p=args.salt)
            name = f"line_{i:05d}.pgm"
            save_pgm(out / name, img)
            records.append({"image_path": name, "label_ids": label, "seed": seed})
        corpus_mod.write_manifest(out / "manifest.jsonl", records)
    except OSError as e:
        raise CliError(f"cannot write corpus: {e}", EXIT_IO)
    print(f"wrote {len(records)} lines to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        gs = corpus_mod.load_atlas(args.atlas)
        records = corpus_mod.read_manifest(args.manifest)
    except OSError as e:
        raise CliError(f"cannot load inputs: {e}", EXIT_IO)
    base = Path(args.manifest).parent
    data = []
    for rec in records:
        try:
            gray = load_image(base / rec["image_path"])
        except (ImageReadError, UnsupportedFormatError) as e:
            raise CliError(str(e), EXIT_IO)
        binary = BinaryImage(gray.pixels > 127)
        data.append((make_frames(binary, args.window), rec["label_ids"]))
    n_symbols = len(gs.symbol_ids)
    model = init_model(gs.height, args.window, n_symbols, args.state, args.seed)
    try:
        model = train_toy(model, data, epochs=args.epochs, lr=args.lr, seed=args.seed)
    except TrainingDivergedError as e:
        raise CliError(str(e), EXIT_PIPELINE)
    except InfeasibleLabelError as e:
        raise CliError(f"corpus line too short for its label: {e}", EXIT_PIPELINE)
    for i, loss in enumerate(model.loss_curve):
        print(f"epoch {i} loss {loss:.6f}", file=sys.stderr)
    try:
        save_checkpoint(args.out, model)
    except OSError as e:
        raise CliError(f"cannot write checkpoint: {e}", EXIT_IO)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        refs = Path(args.refs).read_text().splitlines()
        hyps = Path(args.hyps).read_text().splitlines()
    except OSError as e:
        raise CliError(f"cannot read inputs: {e}", EXIT_IO)
    eq = None
    if args.eq_map:
        try:
            eq = eval_mod.load_equivalence(args.eq_map)
        except OSError as e:
            raise CliError(f"cannot read eq map: {e}", EXIT_IO)
    try:
        rate = eval_mod.cer(refs, hyps, eq)
    except ValueError as e:
        raise CliError(str(e), EXIT_PIPELINE)
    print(f"cer {rate:.6f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    params = _load_params(args)
    static = args.static
    if static is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static = candidate if candidate.is_dir() else None
    app = create_app(args.images, params, static_dir=static)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as e:
        raise CliError(f"cannot bind {args.host}:{args.port}: {e}", EXIT_IO)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scriptorium",
                                 description="document image to text toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("segment", help="segment a page into blobs and lines")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    _add_param_flags(sp)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("ocr", help="transcribe a page with a trained model")
    sp.add_argument("--input", required=True)
    sp.add_argument("--config", help="pipeline config JSON; flags override")
    sp.add_argument("--checkpoint")
    sp.add_argument("--atlas")
    sp.add_argument("--refs", help="reference transcript for CER report")
    sp.add_argument("--eq-map", dest="eq_map")
    _add_param_flags(sp)
    sp.set_defaults(func=cmd_ocr)

    sp = sub.add_parser("cluster", help="cluster glyph images by outline shape")
    sp.add_argument("images", nargs="+")
    sp.add_argument("--threshold", type=float, required=True)
    sp.add_argument("--out")
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--starts", type=int, default=16)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("synth", help="synthesize a training corpus from an atlas")
    sp.add_argument("--atlas", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--demo", action="store_true",
                    help="create the built-in demo atlas if missing")
    sp.add_argument("--lines", type=int, default=0, help="extra random lines")
    sp.add_argument("--min-len", type=int, default=20, dest="min_len")
    sp.add_argument("--max-len", type=int, default=60, dest="max_len")
    sp.add_argument("--salt", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--extra-trigrams", dest="extra_trigrams",
                    help="JSON list of symbol-id triples")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train the toy recurrent model")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--atlas", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window", type=int, default=7)
    sp.add_argument("--state", type=int, default=48)
    sp.add_argument("--epochs", type=int, default=6)
    sp.add_argument("--lr", type=float, default=0.08)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="character error rate of hypothesis lines")
    sp.add_argument("--refs", required=True)
    sp.add_argument("--hyps", required=True)
    sp.add_argument("--eq-map", dest="eq_map")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("serve", help="serve the tuner API and UI")
    sp.add_argument("--images", required=True)
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--static", help="directory of built UI assets")
    _add_param_flags(sp)
    sp.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"scriptorium: {e}", file=sys.stderr)
        return e.code
    except (InfeasibleLabelError, TrainingDivergedError) as e:
        print(f"scriptorium: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
