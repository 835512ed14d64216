"""Seed a small virtual park and render a listener walking through it.

Writes a data directory with a handful of detections around a park
center, then renders the soundscape at three positions along a path to
stereo WAVs you can listen to. Everything is seeded, so two runs
produce identical files.

Usage: python3 scripts/demo_walk.py [out_dir]
"""

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

from birdscape.audio import Annotation
from birdscape.geo import GeoPoint, point_at
from birdscape.repository import Detection, DetectionRepository
from birdscape.soundscape import build_scene, render_scene
from birdscape.synth import synthesize_call
from birdscape.wavio import save_wav

PARK = GeoPoint(45.0703, 7.6869)
T0 = datetime(2025, 5, 1, 6, 30, tzinfo=timezone.utc)

# (species, bearing from park center, meters out, day, submissions)
POPULATION = [
    (0, 40.0, 60.0, 0, 4),
    (1, 130.0, 35.0, 0, 2),
    (2, 250.0, 90.0, 1, 7),
    (3, 320.0, 150.0, 2, 1),
    (4, 90.0, 220.0, 3, 3),
]


def seed(repo):
    for species, bearing, dist, day, n in POPULATION:
        spot = point_at(PARK, bearing, dist)
        for i in range(n):
            clip = synthesize_call(species, 2.0, 22050, seed=species * 1000 + i)
            ref = repo.clips.add(clip)
            det = Detection.create(
                species_id=f"synth-{species:02d}",
                confidence=0.9,
                timestamp=T0 + timedelta(days=day, minutes=i),
                geo=point_at(spot, 73.0 * i, 2.0),
                annotation=Annotation(0.05, 1.9),
                clip_ref=ref,
                submitter=f"demo-user-{i}",
            )
            repo.insert(det)


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-walk")
    out_dir.mkdir(parents=True, exist_ok=True)
    repo = DetectionRepository(out_dir / "data")
    if len(repo) == 0:
        seed(repo)
    print(f"park seeded with {len(repo)} detections")

    path = [
        ("south-entrance", point_at(PARK, 180.0, 120.0), 0.0),
        ("center", PARK, 45.0),
        ("north-exit", point_at(PARK, 0.0, 100.0), 180.0),
    ]
    for name, position, heading in path:
        scene = build_scene(repo, position, heading)
        clip = render_scene(scene, repo.clips, duration_s=8.0)
        wav = out_dir / f"walk-{name}.wav"
        save_wav(wav, clip, sample_format="float32")
        loudest = scene.sources[0] if scene.sources else None
        print(
            f"{wav}: {len(scene.sources)} sources"
            + (
                f", nearest {loudest.species_id} at {loudest.distance_m:.0f} m, "
                f"azimuth {loudest.azimuth_deg:+.0f} deg"
                if loudest
                else ""
            )
        )
    repo.close()


if __name__ == "__main__":
    main()
