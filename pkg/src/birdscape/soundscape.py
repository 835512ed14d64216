"""Position-dependent virtual scenes: sonification mapping, constant-power
panning, adaptive real/virtual mixing, and offline stereo rendering.

Sonification mapping (documented in docs/scene-schema.md): azimuth pans
toward the detection cluster, gain falls off as d0/max(d, d0) with
d0 = 10 m, playback rate grows with the submission count as
clamp(1 + log10(count), 0.25, 4), and the pitch shift encodes migratory
mobility as clamp(mobility_km_per_bucket / 100, 0, 12) semitones. The
mobility mapping is a project choice; the underlying idea is only
directional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import NamedTuple, Optional

import numpy as np

from .audio import AudioClip, resample, to_stereo
from .errors import InvalidParameterError
from .geo import GeoPoint, haversine_m, initial_bearing_deg, normalize_deg, spherical_mean, tile_for
from .repository import DetectionRepository, TimeRange
from .timeutil import format_utc, now_utc

REFERENCE_DISTANCE_M = 10.0
CLUSTER_ZOOM = 14
MAX_SOURCES = 16
REAR_ATTENUATION = 1.0 / math.sqrt(2.0)  # 3 dB for rear-folded sources
MIX_BLOCK_S = 0.05
SILENCE_RMS = 1e-6


class PanGains(NamedTuple):
    left: float
    right: float
    rear: bool


def pan_gains(azimuth_deg: float) -> PanGains:
    """Constant-power stereo gains; left^2 + right^2 = 1 exactly.

    Rear azimuths fold onto the front hemisphere and set the rear flag;
    the renderer applies the 3 dB rear attenuation so the constant-power
    identity holds for every azimuth here.
    """
    a = normalize_deg(azimuth_deg)
    rear = abs(a) > 90.0
    if a > 90.0:
        a = 180.0 - a
    elif a < -90.0:
        a = -180.0 - a
    theta = (a + 90.0) / 180.0 * (math.pi / 2.0)
    return PanGains(math.cos(theta), math.sin(theta), rear)


@dataclass(frozen=True)
class VirtualSource:
    species_id: str
    azimuth_deg: float
    distance_m: float
    gain: float
    playback_rate: float
    spectral_shift_semitones: float
    clip_ref: str

    def __post_init__(self):
        if not (0.0 <= self.gain <= 1.0):
            raise InvalidParameterError(f"gain {self.gain} outside [0, 1]")
        if not (0.25 <= self.playback_rate <= 4.0):
            raise InvalidParameterError(f"playback_rate {self.playback_rate} outside [0.25, 4]")
        if self.distance_m < 0:
            raise InvalidParameterError(f"negative distance {self.distance_m}")
        object.__setattr__(self, "azimuth_deg", normalize_deg(self.azimuth_deg))

    def to_dict(self) -> dict:
        return {
            "species_id": self.species_id,
            "azimuth_deg": self.azimuth_deg,
            "distance_m": self.distance_m,
            "gain": self.gain,
            "playback_rate": self.playback_rate,
            "spectral_shift_semitones": self.spectral_shift_semitones,
            "clip_ref": self.clip_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VirtualSource":
        return cls(
            species_id=d["species_id"],
            azimuth_deg=float(d["azimuth_deg"]),
            distance_m=float(d["distance_m"]),
            gain=float(d["gain"]),
            playback_rate=float(d["playback_rate"]),
            spectral_shift_semitones=float(d["spectral_shift_semitones"]),
            clip_ref=d["clip_ref"],
        )


@dataclass(frozen=True)
class SoundscapeScene:
    position: GeoPoint
    heading_deg: float
    time_from: Optional[datetime]
    time_to: Optional[datetime]
    sources: tuple[VirtualSource, ...]
    generated_at: datetime

    def to_dict(self) -> dict:
        return {
            "position": self.position.to_dict(),
            "heading_deg": self.heading_deg,
            "time_window": {
                "from": None if self.time_from is None else format_utc(self.time_from),
                "to": None if self.time_to is None else format_utc(self.time_to),
            },
            "generated_at": format_utc(self.generated_at),
            "sources": [s.to_dict() for s in self.sources],
        }


@dataclass(frozen=True)
class MixParams:
    target_virtual_to_real_db: float = -6.0
    min_gain: float = 0.05
    max_gain: float = 4.0
    smoothing_s: float = 0.5

    def __post_init__(self):
        if not (self.min_gain <= self.max_gain):
            raise InvalidParameterError(
                f"need min_gain <= max_gain, got {self.min_gain} > {self.max_gain}"
            )
        if not (self.smoothing_s > 0):
            raise InvalidParameterError(f"smoothing_s must be positive, got {self.smoothing_s}")


def playback_rate_for(submission_count: int) -> float:
    return float(min(4.0, max(0.25, 1.0 + math.log10(max(submission_count, 1)))))


def spectral_shift_for(mobility_km_per_bucket: float) -> float:
    return float(min(12.0, max(0.0, mobility_km_per_bucket / 100.0)))


def distance_gain(distance_m: float) -> float:
    return REFERENCE_DISTANCE_M / max(distance_m, REFERENCE_DISTANCE_M)


def build_scene(
    repo: DetectionRepository,
    position: GeoPoint,
    heading_deg: float,
    time_range: TimeRange = (None, None),
    species_filter: Optional[str] = None,
    max_sources: int = MAX_SOURCES,
) -> SoundscapeScene:
    """One virtual source per (species, zoom-14 tile) cluster, nearest first.

    Deterministic given a frozen repository snapshot; the generated_at
    stamp is the only wall-clock field.
    """
    detections = repo.query(time_range=time_range, species_filter=species_filter)
    clusters: dict[tuple[str, object], list] = {}
    for det in detections:
        key = (det.species_id, tile_for(det.geo, CLUSTER_ZOOM))
        clusters.setdefault(key, []).append(det)
    mobility_cache: dict[str, float] = {}
    entries = []
    for (species_id, tile), dets in clusters.items():
        centroid = spherical_mean(d.geo for d in dets)
        distance = haversine_m(position, centroid)
        if species_id not in mobility_cache:
            mobility_cache[species_id] = repo.trajectory(species_id, time_range).mobility_km_per_bucket
        newest = max(dets, key=lambda d: (d.timestamp, d.id))
        source = VirtualSource(
            species_id=species_id,
            azimuth_deg=normalize_deg(initial_bearing_deg(position, centroid) - heading_deg),
            distance_m=distance,
            gain=distance_gain(distance),
            playback_rate=playback_rate_for(len(dets)),
            spectral_shift_semitones=spectral_shift_for(mobility_cache[species_id]),
            clip_ref=newest.clip_ref,
        )
        entries.append(((distance, species_id, tile.x, tile.y), source))
    entries.sort(key=lambda e: e[0])
    return SoundscapeScene(
        position=position,
        heading_deg=float(heading_deg),
        time_from=time_range[0],
        time_to=time_range[1],
        sources=tuple(s for _, s in entries[:max_sources]),
        generated_at=now_utc(),
    )


def time_scrub(
    repo: DetectionRepository,
    position: GeoPoint,
    heading_deg: float,
    shifted_range: TimeRange,
    species_filter: Optional[str] = None,
    max_sources: int = MAX_SOURCES,
) -> SoundscapeScene:
    """Scene for a shifted time window; same semantics as build_scene."""
    return build_scene(repo, position, heading_deg, shifted_range, species_filter, max_sources)


def ara_mix(real: AudioClip, virtual: AudioClip, params: MixParams = MixParams()) -> AudioClip:
    """Adaptive augmented-audio mix of a virtual scene into the real feed.

    Per 50 ms block the virtual gain targets a fixed level offset above
    the measured real RMS (compensating masking by the environment),
    clamped to [min_gain, max_gain] and one-pole smoothed. Blocks where
    the real feed is digitally silent release the constraint and drive
    the gain to max_gain. Output is hard-limited to [-1, 1].
    """
    if real.sample_rate != virtual.sample_rate:
        raise InvalidParameterError(
            f"sample rates differ: {real.sample_rate} vs {virtual.sample_rate}"
        )
    if real.n_frames != virtual.n_frames:
        raise InvalidParameterError(f"lengths differ: {real.n_frames} vs {virtual.n_frames}")
    real_st = to_stereo(real)
    virt_st = to_stereo(virtual)
    n = real_st.n_frames
    block = max(1, int(round(MIX_BLOCK_S * real.sample_rate)))
    alpha = 1.0 - math.exp(-MIX_BLOCK_S / params.smoothing_s)
    offset = 10.0 ** (params.target_virtual_to_real_db / 20.0)
    out = np.empty((n, 2))
    g = None
    for start in range(0, n, block):
        stop = min(start + block, n)
        real_rms = float(np.sqrt(np.mean(real_st.samples[start:stop] ** 2)))
        virt_rms = float(np.sqrt(np.mean(virt_st.samples[start:stop] ** 2)))
        if real_rms <= SILENCE_RMS:
            target = params.max_gain
        else:
            target = offset * real_rms / max(virt_rms, SILENCE_RMS)
            target = min(params.max_gain, max(params.min_gain, target))
        g = target if g is None else g + alpha * (target - g)
        out[start:stop] = real_st.samples[start:stop] + g * virt_st.samples[start:stop]
    return AudioClip(np.clip(out, -1.0, 1.0), real.sample_rate, real.capture_gain_db)


def _loop_resample(src: np.ndarray, n_out: int, rate: float) -> np.ndarray:
    """Loop a mono signal at a playback-rate multiplier for n_out samples."""
    positions = (np.arange(n_out) * rate) % len(src)
    grid = np.arange(len(src) + 1, dtype=float)
    wrapped = np.append(src, src[0])
    return np.interp(positions, grid, wrapped)


def render_scene(
    scene: SoundscapeScene,
    clip_store,
    duration_s: float,
    sample_rate: int = 22050,
) -> AudioClip:
    """Offline stereo render: loop, rate/pitch shift, pan, and sum sources.

    The pitch shift is realized as an extra playback-rate factor of
    2^(semitones/12); summation order is the scene's source order, so
    renders are deterministic.
    """
    if duration_s <= 0:
        raise InvalidParameterError(f"duration must be positive, got {duration_s}")
    n = int(round(duration_s * sample_rate))
    out = np.zeros((n, 2))
    for source in scene.sources:
        clip = clip_store.load(source.clip_ref)
        mono = clip.mono()
        if clip.sample_rate != sample_rate:
            mono = resample(clip, sample_rate).mono()
        rate = source.playback_rate * 2.0 ** (source.spectral_shift_semitones / 12.0)
        rendered = _loop_resample(mono, n, rate) * source.gain
        left, right, rear = pan_gains(source.azimuth_deg)
        if rear:
            rendered = rendered * REAR_ATTENUATION
        out[:, 0] += rendered * left
        out[:, 1] += rendered * right
    return AudioClip(np.clip(out, -1.0, 1.0), sample_rate)
