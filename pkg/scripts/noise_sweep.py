"""Classifier robustness sweep: top-1 accuracy and mAP versus noise SNR.

Builds (or reuses) a synthetic corpus, then evaluates the template
classifier with progressively harsher additive noise on the validation
clips. Prints a table and a JSON summary on stdout.

Usage: python3 scripts/noise_sweep.py [corpus_dir]
"""

import json
import sys
from pathlib import Path

from birdscape.audio import Annotation
from birdscape.augment import NoiseSpec, augment
from birdscape.classifier import DEFAULT_CLASSIFIER, build_template, classify_clip, evaluate
from birdscape.cli import _split_corpus
from birdscape.recognition import preprocess
from birdscape.synth import build_corpus, load_manifest
from birdscape.wavio import load_wav

SNRS = [None, 20.0, 10.0, 5.0, 0.0, -5.0]
SEED = 424242
SPLIT_SEED = 9


def main():
    corpus_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("noise-sweep-corpus")
    if not (corpus_dir / "manifest.json").exists():
        build_corpus(corpus_dir, species_count=8, clips_per_species=20, seed=SEED)
    manifest = load_manifest(corpus_dir)
    train, validation = _split_corpus(manifest, SPLIT_SEED)

    by_species = {}
    for entry in train:
        clip = load_wav(corpus_dir / entry["file"])
        ann = Annotation.from_dict(entry["annotation"])
        by_species.setdefault(entry["species_id"], []).append((clip, ann))
    templates = [
        build_template(sid, clips, DEFAULT_CLASSIFIER) for sid, clips in sorted(by_species.items())
    ]
    clips = [(load_wav(corpus_dir / e["file"]), e["species_id"]) for e in validation]

    rows = []
    print(f"{'SNR (dB)':>10} {'top-1':>8} {'mAP':>8}", file=sys.stderr)
    for snr in SNRS:
        predictions, truth = [], []
        for i, (clip, species_id) in enumerate(clips):
            if snr is not None:
                clip = augment(clip, NoiseSpec(snr_db=snr, seed=1000 + i))
            predictions.append(classify_clip(preprocess(clip), templates))
            truth.append(species_id)
        report = evaluate(predictions, truth)
        label = "clean" if snr is None else f"{snr:g}"
        print(f"{label:>10} {report.top1_accuracy:8.3f} {report.mean_ap:8.3f}", file=sys.stderr)
        rows.append({"snr_db": snr, "top1": report.top1_accuracy, "map": report.mean_ap})
    print(json.dumps({"corpus": str(corpus_dir), "validation_clips": len(clips), "sweep": rows}))


if __name__ == "__main__":
    main()
