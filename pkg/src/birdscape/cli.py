"""Operator command line: serve the API, build corpora and templates,
evaluate the classifier, render scenes to WAV.

Machine-readable output goes to stdout as JSON; logs go to stderr.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from datetime import timedelta
from pathlib import Path

import numpy as np

from .audio import Annotation
from .classifier import (
    DEFAULT_CLASSIFIER,
    build_template,
    classify_clip,
    evaluate,
    save_templates,
)
from .augment import NoiseSpec, augment
from .config import load_config
from .dsp import mel_spectrogram
from .errors import BirdscapeError
from .geo import GeoPoint
from .recognition import preprocess
from .repository import DetectionRepository
from .soundscape import build_scene, render_scene
from .synth import build_corpus, load_manifest
from .timeutil import parse_utc
from .wavio import load_wav, save_wav


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="birdscape", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API server")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--host", help="bind address")
    p.add_argument("--port", type=int, help="bind port")
    p.add_argument("--data-dir", help="data directory")

    p = sub.add_parser("synth-corpus", help="write a deterministic synthetic WAV corpus")
    p.add_argument("out_dir")
    p.add_argument("--species", type=int, default=8, help="number of species (default 8)")
    p.add_argument("--clips", type=int, default=20, help="clips per species (default 20)")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--duration", type=float, default=2.0, help="clip seconds (default 2.0)")

    p = sub.add_parser("eval", help="train/validate the template classifier on a corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--split-seed", type=int, default=1)
    p.add_argument("--noise-snr-db", type=float, default=None, help="augment validation clips with noise")
    p.add_argument("--templates-out", help="also save the trained templates as JSON")

    p = sub.add_parser("build-templates", help="build species templates from a whole corpus")
    p.add_argument("corpus_dir")
    p.add_argument("out_path")

    p = sub.add_parser("render", help="render the soundscape at a position to a stereo WAV")
    p.add_argument("lat", type=float)
    p.add_argument("lon", type=float)
    p.add_argument("out_path")
    p.add_argument("--heading", type=float, default=0.0)
    p.add_argument("--from", dest="time_from", help="ISO 8601 window start")
    p.add_argument("--to", dest="time_to", help="ISO 8601 window end")
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--data-dir", default="birdscape-data")
    return parser


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import AppState, create_app

    config = load_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    if args.data_dir:
        config.data_dir = args.data_dir
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        print(f"error: cannot bind {config.host}:{config.port}: {exc}", file=sys.stderr)
        return 2
    finally:
        probe.close()
    state = AppState(config)
    app = create_app(state)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def _cmd_synth_corpus(args) -> int:
    manifest = build_corpus(args.out_dir, args.species, args.clips, args.seed, args.duration)
    print(
        json.dumps(
            {
                "corpus_dir": str(Path(args.out_dir)),
                "species": len(manifest["species"]),
                "clips": len(manifest["clips"]),
                "seed": manifest["seed"],
            }
        )
    )
    return 0


def _split_corpus(manifest: dict, split_seed: int):
    """Deterministic 80/20 split per species."""
    rng = np.random.default_rng(split_seed)
    by_species: dict[str, list[dict]] = {}
    for entry in manifest["clips"]:
        by_species.setdefault(entry["species_id"], []).append(entry)
    train, validation = [], []
    for species_id in sorted(by_species):
        entries = by_species[species_id]
        order = rng.permutation(len(entries))
        n_train = max(1, int(round(0.8 * len(entries))))
        if n_train >= len(entries):
            n_train = len(entries) - 1
        if n_train < 1:
            raise BirdscapeError(
                f"species {species_id} needs at least 2 clips to split, has {len(entries)}"
            )
        train.extend(entries[i] for i in order[:n_train])
        validation.extend(entries[i] for i in order[n_train:])
    return train, validation


def _load_annotated(corpus_dir: Path, entry: dict):
    clip = load_wav(corpus_dir / entry["file"])
    return clip, Annotation.from_dict(entry["annotation"])


def _cmd_eval(args) -> int:
    corpus_dir = Path(args.corpus_dir)
    manifest = load_manifest(corpus_dir)
    train, validation = _split_corpus(manifest, args.split_seed)
    by_species: dict[str, list] = {}
    for entry in train:
        by_species.setdefault(entry["species_id"], []).append(_load_annotated(corpus_dir, entry))
    templates = [
        build_template(species_id, clips, DEFAULT_CLASSIFIER)
        for species_id, clips in sorted(by_species.items())
    ]
    predictions, truth = [], []
    for i, entry in enumerate(validation):
        clip, _ = _load_annotated(corpus_dir, entry)
        if args.noise_snr_db is not None:
            clip = augment(clip, NoiseSpec(snr_db=args.noise_snr_db, seed=args.split_seed * 100003 + i))
        predictions.append(classify_clip(preprocess(clip, DEFAULT_CLASSIFIER), templates, DEFAULT_CLASSIFIER))
        truth.append(entry["species_id"])
    report = evaluate(predictions, truth)
    if args.templates_out:
        save_templates(args.templates_out, templates, DEFAULT_CLASSIFIER)
    print(
        json.dumps(
            {
                "n_train": len(train),
                "n_validation": len(validation),
                "noise_snr_db": args.noise_snr_db,
                "report": report.to_dict(),
            },
            indent=2,
        )
    )
    print(
        f"top-1 {report.top1_accuracy:.3f}  mAP {report.mean_ap:.3f} "
        f"on {len(validation)} validation clips",
        file=sys.stderr,
    )
    return 0


def _cmd_build_templates(args) -> int:
    corpus_dir = Path(args.corpus_dir)
    manifest = load_manifest(corpus_dir)
    by_species: dict[str, list] = {}
    for entry in manifest["clips"]:
        by_species.setdefault(entry["species_id"], []).append(_load_annotated(corpus_dir, entry))
    templates = [
        build_template(species_id, clips, DEFAULT_CLASSIFIER)
        for species_id, clips in sorted(by_species.items())
    ]
    save_templates(args.out_path, templates, DEFAULT_CLASSIFIER)
    print(json.dumps({"templates": len(templates), "out": args.out_path}))
    return 0


def _cmd_render(args) -> int:
    position = GeoPoint(args.lat, args.lon)
    window = (
        parse_utc(args.time_from) if args.time_from else None,
        parse_utc(args.time_to) if args.time_to else None,
    )
    repo = DetectionRepository(args.data_dir)
    try:
        scene = build_scene(repo, position, args.heading, window)
        clip = render_scene(scene, repo.clips, args.duration)
        save_wav(args.out_path, clip, sample_format="float32")
    finally:
        repo.close()
    print(json.dumps({"out": args.out_path, "sources": len(scene.sources), "duration_s": args.duration}))
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "synth-corpus": _cmd_synth_corpus,
    "eval": _cmd_eval,
    "build-templates": _cmd_build_templates,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (BirdscapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
