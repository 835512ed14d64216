/** Wire types for the /v1 API; shapes pinned by ../docs/schemas. */

export interface GeoPosition {
  lat: number;
  lon: number;
}

export interface VirtualSource {
  species_id: string;
  azimuth_deg: number;
  distance_m: number;
  gain: number;
  playback_rate: number;
  spectral_shift_semitones: number;
  clip_ref: string;
}

export interface Scene {
  position: GeoPosition;
  heading_deg: number;
  time_window: { from: string | null; to: string | null };
  generated_at: string;
  sources: VirtualSource[];
}

export interface Quest {
  id: string;
  title: string;
  targets: Record<string, number>;
  reward_points: number;
  time_limit_s: number | null;
  unlock_requirement: string | null;
}

export interface ActiveQuest {
  quest_id: string;
  accepted_at: string;
  expires_at: string | null;
  progress: Record<string, number>;
  required: Record<string, number>;
}

export interface Profile {
  user_id: string;
  points: number;
  badges: string[];
  active_quests: ActiveQuest[];
  completed_quests: { quest_id: string; at: string }[];
  expired_quests: { quest_id: string; at: string }[];
  submission_count: number;
  distinct_species: number;
}

export type Ranking = [string, number][];

export interface Reward {
  detection_id: string;
  points_delta: number;
  total_points: number;
  badges_earned: string[];
  quests_completed: string[];
  quests_expired: string[];
}

export interface RecordingsResponse {
  status: "accepted" | "low_confidence";
  detection_id: string | null;
  classification: { mode: string; ranking: Ranking; fallback: boolean };
  reward: Reward | null;
}

export interface TileCounts {
  zoom: number;
  x: number;
  y: number;
  counts: Record<string, number>;
  total: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  retryable: boolean;
}

export interface SubmissionMeta {
  lat: number;
  lon: number;
  timestamp: string;
  annotation: { start_s: number; end_s: number };
  mode: "service" | "on-edge";
}
