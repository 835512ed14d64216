"""Event-sourced quests, points, and badges.

Per-user state is a pure fold over that user's event log (one JSON
object per line under profiles/). The fold expires overdue quests
before applying each event, using event timestamps only, so replaying
a log always reproduces points, badges, and quest states exactly.
Profile reads never mutate state; expiry at read time is a view.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional

from .errors import InvalidParameterError, QuestError
from .timeutil import format_utc, now_utc, parse_utc

BADGE_CRITERIA = ("total_detections", "distinct_species", "quest_completions")


@dataclass(frozen=True)
class Quest:
    id: str
    title: str
    targets: dict[str, int]  # species_id -> required count
    reward_points: int
    time_limit_s: Optional[float] = None
    unlock_requirement: Optional[str] = None  # badge id

    def __post_init__(self):
        if not self.targets:
            raise InvalidParameterError(f"quest {self.id!r} has no target species")
        if any(c < 1 for c in self.targets.values()):
            raise InvalidParameterError(f"quest {self.id!r} has non-positive required counts")
        if self.reward_points <= 0:
            raise InvalidParameterError(f"quest {self.id!r} reward must be positive")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise InvalidParameterError(f"quest {self.id!r} time limit must be positive")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "targets": dict(self.targets),
            "reward_points": self.reward_points,
            "time_limit_s": self.time_limit_s,
            "unlock_requirement": self.unlock_requirement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Quest":
        return cls(
            id=d["id"],
            title=d.get("title", d["id"]),
            targets={str(k): int(v) for k, v in d["targets"].items()},
            reward_points=int(d["reward_points"]),
            time_limit_s=d.get("time_limit_s"),
            unlock_requirement=d.get("unlock_requirement"),
        )


@dataclass(frozen=True)
class BadgeRule:
    badge_id: str
    criterion: str
    threshold: int
    grants_bank_access: bool = False

    def __post_init__(self):
        if self.criterion not in BADGE_CRITERIA:
            raise InvalidParameterError(
                f"badge {self.badge_id!r} criterion must be one of {BADGE_CRITERIA}"
            )
        if self.threshold < 1:
            raise InvalidParameterError(f"badge {self.badge_id!r} threshold must be >= 1")

    def to_dict(self) -> dict:
        return {
            "badge_id": self.badge_id,
            "criterion": self.criterion,
            "threshold": self.threshold,
            "grants_bank_access": self.grants_bank_access,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BadgeRule":
        return cls(
            badge_id=d["badge_id"],
            criterion=d["criterion"],
            threshold=int(d["threshold"]),
            grants_bank_access=bool(d.get("grants_bank_access", False)),
        )


@dataclass(frozen=True)
class GameConfig:
    quests: tuple[Quest, ...]
    badges: tuple[BadgeRule, ...]
    base_points: int = 10

    def quest(self, quest_id: str) -> Quest:
        for q in self.quests:
            if q.id == quest_id:
                return q
        raise QuestError(f"unknown quest {quest_id!r}")

    def to_dict(self) -> dict:
        return {
            "base_points": self.base_points,
            "quests": [q.to_dict() for q in self.quests],
            "badges": [b.to_dict() for b in self.badges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        return cls(
            quests=tuple(Quest.from_dict(q) for q in d.get("quests", [])),
            badges=tuple(BadgeRule.from_dict(b) for b in d.get("badges", [])),
            base_points=int(d.get("base_points", 10)),
        )


DEFAULT_GAME_CONFIG = GameConfig(
    quests=(
        Quest("scout-00", "First whistler", {"synth-00": 1}, reward_points=20),
        Quest("scout-01", "Low triller", {"synth-01": 1}, reward_points=20),
        Quest("triple-00", "Whistler hat-trick", {"synth-00": 3}, reward_points=40),
        Quest(
            "pair-hunt",
            "Two-species sprint",
            {"synth-00": 1, "synth-01": 1},
            reward_points=50,
            time_limit_s=3600.0,
            unlock_requirement="spotter",
        ),
        Quest(
            "dawn-chorus",
            "Dawn chorus medley",
            {"synth-00": 2, "synth-02": 1, "synth-03": 1},
            reward_points=80,
            time_limit_s=7200.0,
            unlock_requirement="quest-master",
        ),
    ),
    badges=(
        BadgeRule("hatchling", "total_detections", 1),
        BadgeRule("fledgling", "total_detections", 10, grants_bank_access=True),
        BadgeRule("spotter", "distinct_species", 5),
        BadgeRule("quest-master", "quest_completions", 3),
    ),
    base_points=10,
)


@dataclass
class ActiveQuest:
    quest_id: str
    accepted_at: datetime
    progress: dict[str, int] = field(default_factory=dict)

    def deadline(self, quest: Quest) -> Optional[datetime]:
        if quest.time_limit_s is None:
            return None
        return self.accepted_at + timedelta(seconds=quest.time_limit_s)


@dataclass
class ProfileState:
    user_id: str
    points: int = 0
    badges: list[str] = field(default_factory=list)
    active: dict[str, ActiveQuest] = field(default_factory=dict)
    completed: list[tuple[str, datetime]] = field(default_factory=list)
    expired: list[tuple[str, datetime]] = field(default_factory=list)
    submissions: list[str] = field(default_factory=list)  # detection ids
    species_seen: list[str] = field(default_factory=list)
    events_applied: int = 0

    def to_view(self, config: GameConfig, as_of: Optional[datetime] = None) -> dict:
        """Presentation snapshot; quests past deadline shown expired."""
        as_of = as_of or now_utc()
        active = []
        expired_view = [{"quest_id": q, "at": format_utc(t)} for q, t in self.expired]
        for aq in self.active.values():
            quest = config.quest(aq.quest_id)
            deadline = aq.deadline(quest)
            entry = {
                "quest_id": aq.quest_id,
                "accepted_at": format_utc(aq.accepted_at),
                "expires_at": None if deadline is None else format_utc(deadline),
                "progress": {s: aq.progress.get(s, 0) for s in quest.targets},
                "required": dict(quest.targets),
            }
            if deadline is not None and as_of > deadline:
                expired_view.append({"quest_id": aq.quest_id, "at": format_utc(deadline)})
            else:
                active.append(entry)
        return {
            "user_id": self.user_id,
            "points": self.points,
            "badges": list(self.badges),
            "active_quests": active,
            "completed_quests": [
                {"quest_id": q, "at": format_utc(t)} for q, t in self.completed
            ],
            "expired_quests": expired_view,
            "submission_count": len(self.submissions),
            "distinct_species": len(self.species_seen),
        }


@dataclass(frozen=True)
class RewardOutcome:
    detection_id: str
    points_delta: int
    total_points: int
    badges_earned: tuple[str, ...]
    quests_completed: tuple[str, ...]
    quests_expired: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "detection_id": self.detection_id,
            "points_delta": self.points_delta,
            "total_points": self.total_points,
            "badges_earned": list(self.badges_earned),
            "quests_completed": list(self.quests_completed),
            "quests_expired": list(self.quests_expired),
        }


def _expire_due(state: ProfileState, config: GameConfig, at: datetime) -> list[str]:
    expired = []
    for quest_id in list(state.active):
        aq = state.active[quest_id]
        deadline = aq.deadline(config.quest(quest_id))
        if deadline is not None and at > deadline:
            del state.active[quest_id]
            state.expired.append((quest_id, deadline))
            expired.append(quest_id)
    return expired


def _grant_badges(state: ProfileState, config: GameConfig) -> list[str]:
    earned = []
    for rule in config.badges:
        if rule.badge_id in state.badges:
            continue
        value = {
            "total_detections": len(state.submissions),
            "distinct_species": len(state.species_seen),
            "quest_completions": len(state.completed),
        }[rule.criterion]
        if value >= rule.threshold:
            state.badges.append(rule.badge_id)
            earned.append(rule.badge_id)
    return earned


def apply_event(state: ProfileState, event: dict, config: GameConfig) -> Optional[RewardOutcome]:
    """Deterministic fold step; returns the outcome for submission events."""
    at = parse_utc(event["at"])
    kind = event["type"]
    expired = _expire_due(state, config, at)
    outcome = None
    if kind == "quest_accepted":
        quest_id = event["quest_id"]
        config.quest(quest_id)
        if quest_id in state.active:
            raise QuestError(f"quest {quest_id!r} already active")
        state.active[quest_id] = ActiveQuest(quest_id, at)
    elif kind == "submission":
        species_id = event["species_id"]
        points_before = state.points
        state.points += config.base_points
        state.submissions.append(event["detection_id"])
        if species_id not in state.species_seen:
            state.species_seen.append(species_id)
        completed = []
        for quest_id in list(state.active):
            aq = state.active[quest_id]
            quest = config.quest(quest_id)
            if species_id in quest.targets:
                have = aq.progress.get(species_id, 0)
                if have < quest.targets[species_id]:
                    aq.progress[species_id] = have + 1
            if all(aq.progress.get(s, 0) >= c for s, c in quest.targets.items()):
                del state.active[quest_id]
                state.completed.append((quest_id, at))
                state.points += quest.reward_points
                completed.append(quest_id)
        badges = _grant_badges(state, config)
        outcome = RewardOutcome(
            detection_id=event["detection_id"],
            points_delta=state.points - points_before,
            total_points=state.points,
            badges_earned=tuple(badges),
            quests_completed=tuple(completed),
            quests_expired=tuple(expired),
        )
    else:
        raise InvalidParameterError(f"unknown event type {kind!r}")
    state.events_applied += 1
    return outcome


def replay(user_id: str, events: list[dict], config: GameConfig) -> ProfileState:
    """Fold an event log from the empty state."""
    state = ProfileState(user_id)
    for event in events:
        apply_event(state, event, config)
    return state


def _profile_filename(user_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9_-]", "_", user_id)[:40]
    digest = hashlib.sha256(user_id.encode()).hexdigest()[:8]
    return f"{safe}-{digest}.log"


class GameEngine:
    """Per-user event logs with serialized per-user mutations."""

    def __init__(self, data_dir: str | Path, config: GameConfig = DEFAULT_GAME_CONFIG):
        self.config = config
        self.profiles_dir = Path(data_dir) / "profiles"
        self.profiles_dir.mkdir(parents=True, exist_ok=True)
        self._states: dict[str, ProfileState] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()

    @classmethod
    def open(cls, data_dir: str | Path) -> "GameEngine":
        """Engine with config from data_dir/game_config.json, materializing
        the defaults there on first run."""
        path = Path(data_dir) / "game_config.json"
        if path.exists():
            config = GameConfig.from_dict(json.loads(path.read_text()))
        else:
            config = DEFAULT_GAME_CONFIG
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(config.to_dict(), indent=2))
        return cls(data_dir, config)

    def _lock_for(self, user_id: str) -> threading.RLock:
        with self._registry_lock:
            if user_id not in self._locks:
                self._locks[user_id] = threading.RLock()
            return self._locks[user_id]

    def _log_path(self, user_id: str) -> Path:
        return self.profiles_dir / _profile_filename(user_id)

    def _state(self, user_id: str) -> ProfileState:
        if user_id not in self._states:
            events = []
            path = self._log_path(user_id)
            if path.exists():
                with open(path, encoding="utf-8") as fh:
                    events = [json.loads(line) for line in fh if line.strip()]
            self._states[user_id] = replay(user_id, events, self.config)
        return self._states[user_id]

    def _append(self, user_id: str, event: dict) -> None:
        with open(self._log_path(user_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def profile(self, user_id: str, as_of: Optional[datetime] = None) -> dict:
        with self._lock_for(user_id):
            return self._state(user_id).to_view(self.config, as_of)

    def events(self, user_id: str) -> list[dict]:
        path = self._log_path(user_id)
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def available_quests(self, user_id: str, as_of: Optional[datetime] = None) -> list[Quest]:
        """Quests whose badge gate the user passes, not active or completed."""
        with self._lock_for(user_id):
            state = self._state(user_id)
            as_of = as_of or now_utc()
            out = []
            for quest in sorted(self.config.quests, key=lambda q: q.id):
                if quest.unlock_requirement and quest.unlock_requirement not in state.badges:
                    continue
                if quest.id in [q for q, _ in state.completed]:
                    continue
                aq = state.active.get(quest.id)
                if aq is not None:
                    deadline = aq.deadline(quest)
                    if deadline is None or as_of <= deadline:
                        continue  # genuinely active
                out.append(quest)
            return out

    def accept_quest(self, user_id: str, quest_id: str, at: Optional[datetime] = None) -> dict:
        at = at or now_utc()
        with self._lock_for(user_id):
            state = self._state(user_id)
            quest = self.config.quest(quest_id)
            if quest.unlock_requirement and quest.unlock_requirement not in state.badges:
                raise QuestError(f"quest {quest_id!r} is locked behind badge {quest.unlock_requirement!r}")
            if quest.id in [q for q, _ in state.completed]:
                raise QuestError(f"quest {quest_id!r} already completed")
            aq = state.active.get(quest_id)
            if aq is not None:
                deadline = aq.deadline(quest)
                if deadline is None or at <= deadline:
                    raise QuestError(f"quest {quest_id!r} already active")
            event = {"type": "quest_accepted", "quest_id": quest_id, "at": format_utc(at)}
            apply_event(state, event, self.config)
            self._append(user_id, event)
            return state.to_view(self.config, at)

    def record_submission(self, user_id: str, detection, at: Optional[datetime] = None) -> RewardOutcome:
        """Award base points and advance quests for an accepted detection."""
        at = at or detection.timestamp
        with self._lock_for(user_id):
            state = self._state(user_id)
            event = {
                "type": "submission",
                "detection_id": detection.id,
                "species_id": detection.species_id,
                "at": format_utc(at),
            }
            outcome = apply_event(state, event, self.config)
            self._append(user_id, event)
            return outcome

    def bank_unlocked(self, user_id_or_profile) -> bool:
        """True when the user holds any badge that grants bank access."""
        if isinstance(user_id_or_profile, str):
            badges = set(self.profile(user_id_or_profile)["badges"])
        else:
            badges = set(user_id_or_profile.get("badges", []))
        granting = {b.badge_id for b in self.config.badges if b.grants_bank_access}
        return bool(badges & granting)
