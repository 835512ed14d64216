/**
 * Explorer state as a pure reducer: the state is a function of the
 * initial conditions and the ordered log of events (user inputs plus
 * server responses), so replaying a log reproduces the exact state.
 * All effects (fetches, audio) live outside, in main.ts.
 */

import { walk } from "./geo.js";
import { normalizeDeg } from "./pan.js";
import {
  GeoPosition,
  Profile,
  Quest,
  RecordingsResponse,
  Scene,
  TileCounts,
  VirtualSource,
} from "./types.js";

export const SCAN_CONE_DEG = 15;
const MAX_TOASTS = 8;

export interface PoiDetail {
  speciesId: string;
  distanceM: number;
  azimuthDeg: number;
  clipRef: string;
}

export interface ExplorerState {
  token: string;
  position: GeoPosition;
  heading: number;
  window: { from: string | null; to: string | null };
  scene: Scene | null;
  sceneStale: boolean;
  banner: string | null;
  profile: Profile | null;
  quests: Quest[];
  tiles: Record<string, TileCounts>;
  highlighted: number[]; // indices into scene.sources
  poi: PoiDetail | null;
  bank: Record<string, string[] | "locked">;
  toasts: string[];
  playing: boolean;
  lastSubmission: RecordingsResponse | null;
}

export type ExplorerEvent =
  | { kind: "walk"; bearingDeg: number; meters: number }
  | { kind: "turn"; deltaDeg: number }
  | { kind: "scrub"; from: string | null; to: string | null }
  | { kind: "scan" }
  | { kind: "tilt" }
  | { kind: "toggle-playback" }
  | { kind: "scene-loaded"; scene: Scene }
  | { kind: "scene-failed"; message: string }
  | { kind: "tiles-loaded"; tiles: TileCounts[] }
  | { kind: "profile-loaded"; profile: Profile }
  | { kind: "quests-loaded"; quests: Quest[] }
  | { kind: "quest-accepted"; profile: Profile }
  | { kind: "quest-accept-failed"; code: string; message: string }
  | { kind: "submit-finished"; response: RecordingsResponse }
  | { kind: "submit-failed"; code: string; message: string }
  | { kind: "bank-loaded"; speciesId: string; clipRefs: string[] }
  | { kind: "bank-locked"; speciesId: string };

export function initialState(
  token: string,
  position: GeoPosition,
  heading = 0,
  window: { from: string | null; to: string | null } = { from: null, to: null }
): ExplorerState {
  return {
    token,
    position,
    heading,
    window,
    scene: null,
    sceneStale: false,
    banner: null,
    profile: null,
    quests: [],
    tiles: {},
    highlighted: [],
    poi: null,
    bank: {},
    toasts: [],
    playing: false,
    lastSubmission: null,
  };
}

/**
 * Azimuth of a scene source relative to the avatar's CURRENT heading.
 * Scene azimuths are relative to the heading at fetch time; turning in
 * place shifts every rendered azimuth by the opposite amount until the
 * next scene arrives.
 */
export function renderedAzimuth(state: ExplorerState, source: VirtualSource): number {
  const sceneHeading = state.scene ? state.scene.heading_deg : state.heading;
  return normalizeDeg(source.azimuth_deg + sceneHeading - state.heading);
}

export function scanHits(state: ExplorerState): number[] {
  if (!state.scene) return [];
  const hits: number[] = [];
  state.scene.sources.forEach((source, i) => {
    if (Math.abs(renderedAzimuth(state, source)) <= SCAN_CONE_DEG) hits.push(i);
  });
  return hits;
}

function pushToast(toasts: string[], message: string): string[] {
  return [...toasts, message].slice(-MAX_TOASTS);
}

function rewardToasts(toasts: string[], response: RecordingsResponse): string[] {
  if (response.status === "low_confidence") {
    return pushToast(toasts, "not recognized: try a clearer recording");
  }
  const species = response.classification.ranking[0][0];
  let out = toasts;
  if (response.reward) {
    out = pushToast(out, `${species} +${response.reward.points_delta} pts`);
    for (const badge of response.reward.badges_earned) out = pushToast(out, `badge earned: ${badge}`);
    for (const quest of response.reward.quests_completed) out = pushToast(out, `quest complete: ${quest}`);
    for (const quest of response.reward.quests_expired) out = pushToast(out, `quest expired: ${quest}`);
  } else {
    out = pushToast(out, `${species}: already recorded`);
  }
  return out;
}

export function reduce(state: ExplorerState, event: ExplorerEvent): ExplorerState {
  switch (event.kind) {
    case "walk":
      return {
        ...state,
        position: walk(state.position, event.bearingDeg, event.meters),
        highlighted: [],
        poi: null,
      };
    case "turn":
      return {
        ...state,
        heading: normalizeDeg(state.heading + event.deltaDeg),
        highlighted: [],
        poi: null,
      };
    case "scrub": {
      if (event.from === state.window.from && event.to === state.window.to) return state;
      return { ...state, window: { from: event.from, to: event.to }, highlighted: [], poi: null };
    }
    case "scan":
      return { ...state, highlighted: scanHits(state) };
    case "tilt": {
      if (!state.scene || state.highlighted.length === 0) return { ...state, poi: null };
      const nearest = state.highlighted
        .map((i) => state.scene!.sources[i])
        .sort((a, b) => a.distance_m - b.distance_m)[0];
      return {
        ...state,
        poi: {
          speciesId: nearest.species_id,
          distanceM: nearest.distance_m,
          azimuthDeg: renderedAzimuth(state, nearest),
          clipRef: nearest.clip_ref,
        },
      };
    }
    case "toggle-playback":
      return { ...state, playing: !state.playing };
    case "scene-loaded":
      return { ...state, scene: event.scene, sceneStale: false, banner: null };
    case "scene-failed":
      // Keep the last scene; surface the outage.
      return { ...state, sceneStale: true, banner: `server unreachable: ${event.message}` };
    case "tiles-loaded": {
      const tiles = { ...state.tiles };
      for (const t of event.tiles) tiles[`${t.zoom}/${t.x}/${t.y}`] = t;
      return { ...state, tiles };
    }
    case "profile-loaded":
    case "quest-accepted":
      return { ...state, profile: event.profile };
    case "quests-loaded":
      return { ...state, quests: event.quests };
    case "quest-accept-failed":
      return { ...state, toasts: pushToast(state.toasts, `quest: ${event.message}`) };
    case "submit-finished":
      return {
        ...state,
        lastSubmission: event.response,
        toasts: rewardToasts(state.toasts, event.response),
      };
    case "submit-failed":
      return { ...state, toasts: pushToast(state.toasts, `upload failed: ${event.message}`) };
    case "bank-loaded":
      return { ...state, bank: { ...state.bank, [event.speciesId]: event.clipRefs } };
    case "bank-locked":
      return { ...state, bank: { ...state.bank, [event.speciesId]: "locked" } };
  }
}

export function replay(
  token: string,
  position: GeoPosition,
  heading: number,
  events: ExplorerEvent[]
): ExplorerState {
  let state = initialState(token, position, heading);
  for (const event of events) state = reduce(state, event);
  return state;
}
