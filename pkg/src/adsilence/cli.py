"""Command-line interface.

Exit codes: 0 success, 2 input/format error, 3 insufficient data,
4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

from adsilence import pipeline, synthkit
from adsilence.ad_grouping import GroupingParams, read_regions, regions_to_frame_labels, write_regions
from adsilence.audio_ingest import FRAME_LEN, decode_wav, write_wav
from adsilence.boundary_regression import (
    BETA,
    LABEL_TOLERANCE,
    Programme,
    cross_validate,
    fit_ols,
    label_events,
    load_model,
    residual_norm,
    save_model,
)
from adsilence.energy_analysis import ETA_DB
from adsilence.errors import AdSilenceError, InputError, InsufficientData
from adsilence.evaluation import (
    EvaluationReport,
    confusion_counts,
    parse_annotations,
    write_annotations,
)
from adsilence.silence_features import FEATURE_NAMES, HALF_WIDTH

log = logging.getLogger("adsilence")

MANIFEST_HEADER = ("programme_id", "wav_path", "annotation_path")


def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise argparse.ArgumentTypeError(f"{v} is below the allowed range")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise argparse.ArgumentTypeError(f"{v} is above the allowed range")
        return v
    return parse


def _add_detection_flags(p):
    p.add_argument("--eta", type=_ranged(float, hi=0.0, hi_open=True), default=None,
                   help=f"silence threshold in dB (default {ETA_DB}, or the model's)")
    p.add_argument("--beta", type=_ranged(float, 0.0, 1.0, True, True), default=None,
                   help=f"regression decision threshold (default {BETA}, or the model's)")
    p.add_argument("--half-width", type=_ranged(int, lo=1), default=None,
                   help=f"feature context half-width in frames (default {HALF_WIDTH})")


def _add_grouping_flags(p):
    d = GroupingParams()
    p.add_argument("--window", type=_ranged(int, lo=1), default=d.window_frames,
                   help="long-term grouping window in frames")
    p.add_argument("--min-region", type=_ranged(int, lo=1), default=d.min_region_frames,
                   help="minimum advertising region length in frames")
    p.add_argument("--edge-offset", type=_ranged(int, lo=0), default=d.edge_offset_frames,
                   help="shift region edges forward by this many frames")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adsilence",
        description="Audio-only advertisement detection from boundary silences.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect advertising regions in a WAV file")
    p.add_argument("input", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scores", action="store_true",
                   help="also write per-frame energy and per-silence score CSVs")
    _add_detection_flags(p)
    _add_grouping_flags(p)

    p = sub.add_parser("train", help="fit the boundary regression on a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--label-tolerance", type=_ranged(int, lo=0), default=LABEL_TOLERANCE)
    _add_detection_flags(p)

    p = sub.add_parser("crossval", help="leave-one-programme-out cross-validation")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--label-tolerance", type=_ranged(int, lo=0), default=LABEL_TOLERANCE)
    _add_detection_flags(p)
    _add_grouping_flags(p)

    p = sub.add_parser("evaluate", help="score a region CSV against annotations")
    p.add_argument("--regions", type=Path, required=True)
    p.add_argument("--annotations", type=Path, required=True)
    length = p.add_mutually_exclusive_group(required=True)
    length.add_argument("--wav", type=Path, help="recording that sets the frame count")
    length.add_argument("--total-frames", type=_ranged(int, lo=1))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--programme-id", default="programme")

    p = sub.add_parser("synth", help="write a synthetic broadcast WAV with annotations")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="SynthConfig JSON; overrides --blocks/--confusers")
    p.add_argument("--blocks", type=_ranged(int, lo=0), default=None)
    p.add_argument("--confusers", action="store_true")
    p.add_argument("--bits", type=int, choices=(16, 24, 32), default=24)

    p = sub.add_parser("export-energy", help="write the per-frame energy track as CSV")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--eta", type=_ranged(float, hi=0.0, hi_open=True), default=ETA_DB)
    return parser


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _grouping(args) -> GroupingParams:
    return GroupingParams(
        window_frames=args.window,
        min_region_frames=args.min_region,
        edge_offset_frames=args.edge_offset,
    )


def _write_energy_csv(path: Path, track, eta: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write("frame,energy_db,is_silence\n")
        f.writelines(
            f"{i},{e:.6f},{int(e <= eta)}\n" for i, e in enumerate(track.energies_db.tolist())
        )


def _write_feature_csv(path: Path, examples) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("anchor_frame", *FEATURE_NAMES, "label"))
        for ex in examples:
            w.writerow((ex.anchor_frame, *(repr(v) for v in ex.features.as_array().tolist()),
                        int(ex.label)))


def read_manifest(path: Path) -> list[tuple[str, Path, Path]]:
    base = path.parent
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(line for line in f if line.strip()))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not rows or tuple(h.strip() for h in rows[0]) != MANIFEST_HEADER:
        raise InputError(f"{path}: expected header {','.join(MANIFEST_HEADER)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 columns")
        pid, wav, ann = (c.strip() for c in row)
        entries.append((pid, base / wav, base / ann))
    if not entries:
        raise InsufficientData(f"{path}: manifest lists no programmes")
    return entries


def load_corpus(manifest: Path, eta: float, half_width: int) -> list[tuple[Programme, pipeline.Analysis]]:
    corpus = []
    for lineno, (pid, wav, ann) in enumerate(read_manifest(manifest), start=2):
        try:
            analysis = pipeline.analyse(decode_wav(wav), eta, half_width)
            annotations = parse_annotations(ann, analysis.total_frames)
        except AdSilenceError as exc:
            raise type(exc)(f"{manifest}:{lineno} ({pid}): {exc}") from exc
        except OSError as exc:
            raise InputError(f"{manifest}:{lineno} ({pid}): {exc}") from exc
        corpus.append((Programme(pid, analysis.events, analysis.features, annotations), analysis))
    return corpus


def run_detect(args) -> int:
    model = load_model(args.model)
    model = dataclasses.replace(
        model,
        **{k: v for k, v in (("beta", args.beta), ("eta", args.eta),
                              ("half_width_frames", args.half_width)) if v is not None},
    )
    params = _grouping(args)
    analysis = pipeline.analyse(decode_wav(args.input), model.eta, model.half_width_frames)
    regions = pipeline.detect(analysis, model, params)
    args.out.mkdir(parents=True, exist_ok=True)
    write_regions(args.out / "regions.csv", regions, params)
    _write_json(args.out / "params.json", {
        "command": "detect",
        "beta": model.beta, "eta": model.eta, "half_width_frames": model.half_width_frames,
        **dataclasses.asdict(params),
    })
    if args.scores:
        _write_energy_csv(args.out / "energy.csv", analysis.track, model.eta)
        accepted = {ev.anchor_frame for ev in pipeline.classify_accepted(analysis, model)}
        with open(args.out / "scores.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("anchor_frame", "start_frame", "end_frame", "min_energy_db", "score", "accepted"))
            for ev, s in zip(analysis.events, pipeline.scores(analysis, model)):
                w.writerow((ev.anchor_frame, ev.start_frame, ev.end_frame,
                            f"{ev.min_energy_db:.6f}", f"{s:.6f}", int(ev.anchor_frame in accepted)))
    log.info("%d region(s) written to %s", len(regions), args.out / "regions.csv")
    return 0


def run_train(args) -> int:
    eta = ETA_DB if args.eta is None else args.eta
    half_width = HALF_WIDTH if args.half_width is None else args.half_width
    beta = BETA if args.beta is None else args.beta
    corpus = load_corpus(args.manifest, eta, half_width)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "features").mkdir(exist_ok=True)
    examples = []
    per_programme = {}
    for prog, _ in corpus:
        ex = label_events(prog.events, prog.annotations, args.label_tolerance,
                          prog.programme_id, prog.features)
        _write_feature_csv(args.out / "features" / f"{prog.programme_id}.csv", ex)
        per_programme[prog.programme_id] = {
            "positives": sum(e.label == 1.0 for e in ex),
            "negatives": sum(e.label == 0.0 for e in ex),
        }
        examples.extend(ex)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = fit_ols(examples, beta=beta, eta=eta, half_width_frames=half_width)
    notes = [str(w.message) for w in caught]
    for note in notes:
        log.warning("%s", note)
    save_model(model, args.out / "model.json")
    _write_json(args.out / "train_report.json", {
        "examples": len(examples),
        "positives": sum(e.label == 1.0 for e in examples),
        "negatives": sum(e.label == 0.0 for e in examples),
        "per_programme": per_programme,
        "residual_norm": residual_norm(model, examples),
        "label_tolerance_frames": args.label_tolerance,
        "beta": beta, "eta": eta, "half_width_frames": half_width,
        "warnings": notes,
    })
    return 0


def run_crossval(args) -> int:
    eta = ETA_DB if args.eta is None else args.eta
    half_width = HALF_WIDTH if args.half_width is None else args.half_width
    beta = BETA if args.beta is None else args.beta
    params = _grouping(args)
    corpus = [prog for prog, _ in load_corpus(args.manifest, eta, half_width)]
    report = cross_validate(corpus, beta, params=params, tolerance_frames=args.label_tolerance,
                            eta=eta, half_width_frames=half_width)
    args.out.mkdir(parents=True, exist_ok=True)
    table = report.as_evaluation()
    table.write_csv(args.out / "crossval.csv")
    (args.out / "crossval.txt").write_text(table.format_text(), encoding="utf-8")
    _write_json(args.out / "params.json", {
        "command": "crossval", "beta": beta, "eta": eta, "half_width_frames": half_width,
        "label_tolerance_frames": args.label_tolerance, **dataclasses.asdict(params),
    })
    sys.stdout.write(table.format_text())
    return 0


def run_evaluate(args) -> int:
    if args.wav is not None:
        sig = decode_wav(args.wav)
        total = sig.n_instants // FRAME_LEN
    else:
        total = args.total_frames
    annotations = parse_annotations(args.annotations, total)
    regions = read_regions(args.regions)
    report = EvaluationReport()
    report.add(args.programme_id, confusion_counts(
        regions_to_frame_labels(regions, total), annotations.frame_labels()))
    args.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.out / "evaluation.csv")
    (args.out / "evaluation.txt").write_text(report.format_text(), encoding="utf-8")
    sys.stdout.write(report.format_text())
    return 0


def run_synth(args) -> int:
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.config}: {exc}") from exc
        cfg = synthkit.SynthConfig.from_dict(doc)
    else:
        cfg = synthkit.broadcast_config(args.seed, n_blocks=args.blocks, confusers=args.confusers)
    sig, ann = synthkit.generate(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_wav(args.out / "synth.wav", sig, bits=args.bits)
    write_annotations(args.out / "synth_annotations.csv", ann)
    (args.out / "synth_config.json").write_text(cfg.to_json(), encoding="utf-8")
    return 0


def run_export_energy(args) -> int:
    analysis = pipeline.analyse(decode_wav(args.input), args.eta)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_energy_csv(args.out / "energy.csv", analysis.track, args.eta)
    _write_json(args.out / "params.json", {"command": "export-energy", "eta": args.eta,
                                           "frame_len_samples": FRAME_LEN})
    return 0


COMMANDS = {
    "detect": run_detect,
    "train": run_train,
    "crossval": run_crossval,
    "evaluate": run_evaluate,
    "synth": run_synth,
    "export-energy": run_export_energy,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AdSilenceError as exc:
        print(f"error[{type(exc).__name__}/{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[{type(exc).__name__}/input]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
