"""Durable store of detections with spatial, temporal, and species queries.

On-disk layout under the data directory (documented in
docs/storage-layout.md):

    detections.log   one JSON object per line, append-only
    clips/<sha256>.wav   content-addressed audio
    snapshot.json    all detections at snapshot time plus the count of
                     log lines it covers; on open the snapshot is loaded
                     and any later log lines replayed

Detection ids are content hashes of (submitter, clip_ref, annotation),
which makes insertion idempotent and log replay convergent.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Optional, Sequence

from .audio import Annotation, AudioClip
from .errors import AccessDeniedError, InvalidParameterError
from .geo import GeoPoint, Quadtree, TileKey, haversine_m, mercator_unit, spherical_mean, tile_for
from .timeutil import format_utc, now_utc, parse_utc
from .wavio import load_wav, save_wav, wav_bytes

DEFAULT_MIN_CONFIDENCE = 0.65

TimeRange = tuple[Optional[datetime], Optional[datetime]]
OPEN_RANGE: TimeRange = (None, None)
GLOBE = (GeoPoint(-90.0, -180.0), GeoPoint(90.0, 180.0))


def detection_id(submitter: str, clip_ref: str, annotation: Annotation) -> str:
    canonical = json.dumps(
        {"submitter": submitter, "clip_ref": clip_ref, "annotation": annotation.to_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(canonical.encode()).hexdigest()[:32]


@dataclass(frozen=True)
class Detection:
    id: str
    species_id: str
    confidence: float
    timestamp: datetime
    geo: GeoPoint
    annotation: Annotation
    clip_ref: str
    submitter: str

    @classmethod
    def create(
        cls,
        species_id: str,
        confidence: float,
        timestamp: datetime,
        geo: GeoPoint,
        annotation: Annotation,
        clip_ref: str,
        submitter: str,
    ) -> "Detection":
        return cls(
            id=detection_id(submitter, clip_ref, annotation),
            species_id=species_id,
            confidence=confidence,
            timestamp=timestamp,
            geo=geo,
            annotation=annotation,
            clip_ref=clip_ref,
            submitter=submitter,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "species_id": self.species_id,
            "confidence": self.confidence,
            "timestamp": format_utc(self.timestamp),
            "geo": self.geo.to_dict(),
            "annotation": self.annotation.to_dict(),
            "clip_ref": self.clip_ref,
            "submitter": self.submitter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls(
            id=d["id"],
            species_id=d["species_id"],
            confidence=float(d["confidence"]),
            timestamp=parse_utc(d["timestamp"]),
            geo=GeoPoint.from_dict(d["geo"]),
            annotation=Annotation.from_dict(d["annotation"]),
            clip_ref=d["clip_ref"],
            submitter=d["submitter"],
        )


@dataclass(frozen=True)
class TrajectoryEntry:
    bucket_index: int
    bucket_start: datetime
    centroid: GeoPoint
    count: int

    def to_dict(self) -> dict:
        return {
            "bucket_index": self.bucket_index,
            "bucket_start": format_utc(self.bucket_start),
            "centroid": self.centroid.to_dict(),
            "count": self.count,
        }


@dataclass(frozen=True)
class Trajectory:
    species_id: str
    entries: tuple[TrajectoryEntry, ...]
    mobility_km_per_bucket: float

    def to_dict(self) -> dict:
        return {
            "species_id": self.species_id,
            "entries": [e.to_dict() for e in self.entries],
            "mobility_km_per_bucket": self.mobility_km_per_bucket,
        }


def _lon_interval(sw: GeoPoint, ne: GeoPoint) -> tuple[float, float]:
    # GeoPoint canonicalizes +180 to -180; an east edge of -180 means +180.
    hi = 180.0 if ne.lon == -180.0 else ne.lon
    if not (sw.lon < hi):
        raise InvalidParameterError(f"inverted longitude range [{sw.lon}, {hi}]")
    return sw.lon, hi


def _validate_bbox(bbox: tuple[GeoPoint, GeoPoint]) -> tuple[float, float, float, float]:
    sw, ne = bbox
    if not (sw.lat < ne.lat):
        raise InvalidParameterError(f"inverted latitude range [{sw.lat}, {ne.lat}]")
    lon_lo, lon_hi = _lon_interval(sw, ne)
    return sw.lat, ne.lat, lon_lo, lon_hi


def _validate_time_range(time_range: TimeRange) -> TimeRange:
    lo, hi = time_range
    if lo is not None and hi is not None and lo > hi:
        raise InvalidParameterError(f"inverted time range [{lo}, {hi}]")
    return time_range


class ClipStore:
    """Content-addressed WAV files under clips/."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)

    def add(self, clip: AudioClip) -> str:
        payload = wav_bytes(clip, sample_format="float32")
        ref = hashlib.sha256(payload).hexdigest()
        path = self.root / f"{ref}.wav"
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(payload)
            tmp.rename(path)
        return ref

    def exists(self, ref: str) -> bool:
        return (self.root / f"{ref}.wav").exists()

    def load(self, ref: str) -> AudioClip:
        path = self.root / f"{ref}.wav"
        if not path.exists():
            raise InvalidParameterError(f"clip_ref {ref!r} not in store")
        return load_wav(path)


class DetectionRepository:
    """Thread-safe detection store: serialized writer, consistent reads."""

    SNAPSHOT_EVERY = 500  # inserts between periodic snapshots

    def __init__(self, data_dir: str | Path, min_confidence: float = DEFAULT_MIN_CONFIDENCE):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.min_confidence = min_confidence
        self.clips = ClipStore(self.data_dir / "clips")
        self._log_path = self.data_dir / "detections.log"
        self._snapshot_path = self.data_dir / "snapshot.json"
        self._lock = threading.RLock()
        self._detections: list[Detection] = []
        self._by_id: dict[str, Detection] = {}
        self._index = Quadtree()
        self._log_lines = 0
        self._inserts_since_snapshot = 0
        self._load()
        self._log_file = open(self._log_path, "a", encoding="utf-8")

    def _load(self) -> None:
        start_line = 0
        if self._snapshot_path.exists():
            snap = json.loads(self._snapshot_path.read_text())
            for d in snap.get("detections", []):
                self._apply(Detection.from_dict(d))
            start_line = int(snap.get("log_lines", 0))
        if self._log_path.exists():
            with open(self._log_path, encoding="utf-8") as fh:
                for i, line in enumerate(fh):
                    if i >= start_line and line.strip():
                        self._apply(Detection.from_dict(json.loads(line)))
                    self._log_lines = i + 1

    def _apply(self, det: Detection) -> None:
        if det.id in self._by_id:
            return
        self._by_id[det.id] = det
        self._detections.append(det)
        x, y = mercator_unit(det.geo)
        self._index.insert(x, y, det)

    def _validate(self, det: Detection) -> None:
        if not (0.0 <= det.confidence <= 1.0):
            raise InvalidParameterError(f"confidence {det.confidence} outside [0, 1]")
        if det.confidence < self.min_confidence:
            raise InvalidParameterError(
                f"confidence {det.confidence:.3f} below acceptance threshold {self.min_confidence}"
            )
        if det.timestamp > now_utc():
            raise InvalidParameterError(f"timestamp {format_utc(det.timestamp)} is in the future")
        if not self.clips.exists(det.clip_ref):
            raise InvalidParameterError(f"clip_ref {det.clip_ref!r} does not resolve")
        expected = detection_id(det.submitter, det.clip_ref, det.annotation)
        if det.id != expected:
            raise InvalidParameterError("detection id does not match its content hash")

    def insert(self, det: Detection) -> str:
        """Store a detection; idempotent on (submitter, clip_ref, annotation)."""
        with self._lock:
            self._validate(det)
            if det.id in self._by_id:
                return det.id
            self._log_file.write(json.dumps(det.to_dict()) + "\n")
            self._log_file.flush()
            self._log_lines += 1
            self._apply(det)
            self._inserts_since_snapshot += 1
            if self._inserts_since_snapshot >= self.SNAPSHOT_EVERY:
                self.snapshot()
            return det.id

    def get(self, detection_id_: str) -> Optional[Detection]:
        with self._lock:
            return self._by_id.get(detection_id_)

    def __len__(self) -> int:
        with self._lock:
            return len(self._detections)

    def query(
        self,
        bbox: tuple[GeoPoint, GeoPoint] = GLOBE,
        time_range: TimeRange = OPEN_RANGE,
        species_filter: Optional[str] = None,
    ) -> list[Detection]:
        """Detections inside bbox, time range, and species filter, by time."""
        lat_lo, lat_hi, lon_lo, lon_hi = _validate_bbox(bbox)
        t_lo, t_hi = _validate_time_range(time_range)
        x0, y1 = mercator_unit(GeoPoint(max(lat_lo, -90.0), lon_lo))
        x1, y0 = mercator_unit(GeoPoint(lat_hi, min(lon_hi, 179.9999999)))
        if lon_hi == 180.0:
            x1 = 1.0
        with self._lock:
            candidates = list(self._index.query(x0, y0, x1, y1))
        out = []
        for det in candidates:
            if not (lat_lo <= det.geo.lat <= lat_hi and lon_lo <= det.geo.lon <= lon_hi):
                continue
            if t_lo is not None and det.timestamp < t_lo:
                continue
            if t_hi is not None and det.timestamp > t_hi:
                continue
            if species_filter is not None and det.species_id != species_filter:
                continue
            out.append(det)
        out.sort(key=lambda d: (d.timestamp, d.id))
        return out

    def tile_counts(
        self,
        zoom: int,
        bbox: tuple[GeoPoint, GeoPoint] = GLOBE,
        time_range: TimeRange = OPEN_RANGE,
        species_filter: Optional[str] = None,
    ) -> dict[TileKey, int]:
        """Per-tile detection counts at a zoom level; children sum to parents."""
        counts: dict[TileKey, int] = {}
        for det in self.query(bbox, time_range, species_filter):
            key = tile_for(det.geo, zoom)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def species_counts_in_tile(
        self,
        tile: TileKey,
        time_range: TimeRange = OPEN_RANGE,
        species_filter: Optional[str] = None,
    ) -> dict[str, int]:
        """Per-species counts restricted to one tile."""
        counts: dict[str, int] = {}
        with self._lock:
            candidates = list(self._index.query(*tile.unit_bounds()))
        t_lo, t_hi = _validate_time_range(time_range)
        for det in candidates:
            if tile_for(det.geo, tile.zoom) != tile:
                continue
            if t_lo is not None and det.timestamp < t_lo:
                continue
            if t_hi is not None and det.timestamp > t_hi:
                continue
            if species_filter is not None and det.species_id != species_filter:
                continue
            counts[det.species_id] = counts.get(det.species_id, 0) + 1
        return counts

    def trajectory(
        self,
        species_id: str,
        time_range: TimeRange = OPEN_RANGE,
        bucket: timedelta = timedelta(days=7),
    ) -> Trajectory:
        """Per-bucket spherical centroids and the mean displacement rate.

        Mobility divides the great-circle distance between consecutive
        present buckets by their index gap, then averages; an empty or
        single-bucket trajectory has mobility 0.
        """
        if bucket <= timedelta(0):
            raise InvalidParameterError(f"bucket must be positive, got {bucket}")
        dets = self.query(GLOBE, time_range, species_id)
        if not dets:
            return Trajectory(species_id, (), 0.0)
        t0 = time_range[0] if time_range[0] is not None else dets[0].timestamp
        groups: dict[int, list[Detection]] = {}
        for det in dets:
            idx = int((det.timestamp - t0) // bucket)
            groups.setdefault(idx, []).append(det)
        entries = tuple(
            TrajectoryEntry(
                bucket_index=idx,
                bucket_start=t0 + idx * bucket,
                centroid=spherical_mean(d.geo for d in groups[idx]),
                count=len(groups[idx]),
            )
            for idx in sorted(groups)
        )
        hops = [
            haversine_m(a.centroid, b.centroid) / 1000.0 / (b.bucket_index - a.bucket_index)
            for a, b in zip(entries, entries[1:])
        ]
        mobility = sum(hops) / len(hops) if hops else 0.0
        return Trajectory(species_id, entries, mobility)

    def clip_refs_for_species(self, species_id: str) -> list[str]:
        with self._lock:
            refs = [d.clip_ref for d in self._detections if d.species_id == species_id]
        seen: set[str] = set()
        out = []
        for ref in refs:
            if ref not in seen:
                seen.add(ref)
                out.append(ref)
        return out

    def species_bank(self, species_id: str, profile, bank_unlocked: Callable[[object], bool]) -> list[str]:
        """Clip references for a species, gated on the caller's badge grant."""
        if not bank_unlocked(profile):
            raise AccessDeniedError(f"species bank requires an unlocking badge")
        return self.clip_refs_for_species(species_id)

    def snapshot(self) -> None:
        with self._lock:
            doc = {
                "log_lines": self._log_lines,
                "detections": [d.to_dict() for d in self._detections],
            }
            tmp = self._snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc))
            tmp.rename(self._snapshot_path)
            self._inserts_since_snapshot = 0

    def close(self) -> None:
        with self._lock:
            self.snapshot()
            self._log_file.close()
