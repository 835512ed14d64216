/**
 * DOM wiring. All state changes flow through dispatch() so the session
 * is an event log; effects (scene/tile/profile fetches, audio) react to
 * the state after each event. In-flight scene requests are aborted when
 * superseded (latest wins).
 */

import { ApiClient, ApiError } from "./api.js";
import { ScenePlayer } from "./audio.js";
import { tileNeighborhood } from "./geo.js";
import { drawMap, MAP_GRID, MAP_ZOOM } from "./map.js";
import { ExplorerEvent, ExplorerState, initialState, reduce, renderedAzimuth } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const params = new URLSearchParams(location.search);
const SERVER = params.get("server") ?? "http://127.0.0.1:8432";
const TOKEN = params.get("token") ?? "explorer";
const START = {
  lat: Number(params.get("lat") ?? 45.07),
  lon: Number(params.get("lon") ?? 7.686),
};

const api = new ApiClient(SERVER, TOKEN);
const player = new ScenePlayer(api);

let state: ExplorerState = initialState(TOKEN, START, 0);
let sceneAbort: AbortController | null = null;
let sceneDebounce: ReturnType<typeof setTimeout> | null = null;

function dispatch(event: ExplorerEvent): void {
  const before = state;
  state = reduce(state, event);
  render();
  runEffects(event, before);
}

function scheduleSceneFetch(): void {
  if (sceneDebounce) clearTimeout(sceneDebounce);
  sceneDebounce = setTimeout(() => {
    sceneDebounce = null;
    void fetchScene();
    void fetchTiles();
  }, 150);
}

async function fetchScene(): Promise<void> {
  sceneAbort?.abort();
  const abort = new AbortController();
  sceneAbort = abort;
  try {
    const scene = await api.scene(
      state.position.lat,
      state.position.lon,
      state.heading,
      state.window,
      undefined,
      abort.signal
    );
    if (!abort.signal.aborted) dispatch({ kind: "scene-loaded", scene });
  } catch (err) {
    if (abort.signal.aborted) return; // superseded
    dispatch({ kind: "scene-failed", message: err instanceof Error ? err.message : String(err) });
  }
}

async function fetchTiles(): Promise<void> {
  const keys = tileNeighborhood(state.position, MAP_ZOOM, MAP_GRID);
  const results = await Promise.allSettled(keys.map((k) => api.tile(k, state.window)));
  const tiles = results.flatMap((r) => (r.status === "fulfilled" ? [r.value] : []));
  if (tiles.length) dispatch({ kind: "tiles-loaded", tiles });
}

async function refreshGame(): Promise<void> {
  try {
    dispatch({ kind: "profile-loaded", profile: await api.profile() });
    dispatch({ kind: "quests-loaded", quests: await api.quests() });
  } catch (err) {
    dispatch({ kind: "scene-failed", message: err instanceof Error ? err.message : String(err) });
  }
}

function runEffects(event: ExplorerEvent, before: ExplorerState): void {
  switch (event.kind) {
    case "walk":
    case "scrub":
      scheduleSceneFetch();
      break;
    case "turn":
      // Heading is a request parameter too; refetch, but re-pan immediately.
      player.repan(state);
      scheduleSceneFetch();
      break;
    case "tilt":
      if (state.poi && state.poi.speciesId !== before.poi?.speciesId) {
        void fetchBank(state.poi.speciesId, state.poi.clipRef);
      }
      break;
    case "submit-finished":
      if (event.response.status === "accepted") {
        void refreshGame();
        scheduleSceneFetch();
      }
      break;
    case "scene-loaded":
    case "toggle-playback":
      void player.sync(state);
      break;
    default:
      break;
  }
}

async function fetchBank(speciesId: string, previewRef: string): Promise<void> {
  try {
    const clipRefs = await api.bank(speciesId);
    dispatch({ kind: "bank-loaded", speciesId, clipRefs });
    void player.preview(clipRefs[0] ?? previewRef);
  } catch (err) {
    if (err instanceof ApiError && err.code === "badge_required") {
      dispatch({ kind: "bank-locked", speciesId });
    }
  }
}

// ----------------------------------------------------------------- render

function render(): void {
  drawMap($<HTMLCanvasElement>("map"), state);

  $("position").textContent =
    `${state.position.lat.toFixed(5)}, ${state.position.lon.toFixed(5)}  ` +
    `heading ${Math.round(state.heading)} deg`;
  const banner = $("banner");
  banner.textContent = state.banner ?? "";
  banner.classList.toggle("visible", state.banner !== null);
  $("stale").classList.toggle("visible", state.sceneStale);

  const sources = $("sources");
  sources.innerHTML = "";
  for (const [i, source] of (state.scene?.sources ?? []).entries()) {
    const li = document.createElement("li");
    const azimuth = renderedAzimuth(state, source);
    li.textContent =
      `${source.species_id}  ${Math.round(source.distance_m)} m  ` +
      `${azimuth >= 0 ? "+" : ""}${Math.round(azimuth)} deg`;
    if (state.highlighted.includes(i)) li.classList.add("highlighted");
    sources.appendChild(li);
  }

  const poi = $("poi");
  if (state.poi) {
    const bankState = state.bank[state.poi.speciesId];
    const lock = bankState === "locked" ? " [bank locked: badge required]" : "";
    poi.textContent =
      `${state.poi.speciesId} at ${Math.round(state.poi.distanceM)} m, ` +
      `${Math.round(state.poi.azimuthDeg)} deg${lock}`;
  } else {
    poi.textContent = "scan (E) then tilt (T) toward a highlighted bird";
  }

  const profile = state.profile;
  $("points").textContent = profile ? `${profile.points} pts` : "-";
  $("badges").textContent = profile && profile.badges.length ? profile.badges.join(", ") : "none yet";

  const quests = $("quests");
  quests.innerHTML = "";
  for (const quest of state.quests) {
    const li = document.createElement("li");
    const button = document.createElement("button");
    button.textContent = "accept";
    button.onclick = () => void acceptQuest(quest.id);
    li.textContent = `${quest.title} (+${quest.reward_points}) `;
    li.appendChild(button);
    quests.appendChild(li);
  }
  for (const active of profile?.active_quests ?? []) {
    const li = document.createElement("li");
    const progress = Object.entries(active.required)
      .map(([s, need]) => `${active.progress[s] ?? 0}/${need} ${s}`)
      .join(", ");
    li.textContent = `[active] ${active.quest_id}: ${progress}`;
    quests.appendChild(li);
  }

  const toasts = $("toasts");
  toasts.innerHTML = "";
  for (const message of state.toasts.slice().reverse()) {
    const li = document.createElement("li");
    li.textContent = message;
    toasts.appendChild(li);
  }

  $("playback").textContent = state.playing ? "pause soundscape" : "play soundscape";
}

async function acceptQuest(questId: string): Promise<void> {
  try {
    dispatch({ kind: "quest-accepted", profile: await api.acceptQuest(questId) });
    dispatch({ kind: "quests-loaded", quests: await api.quests() });
  } catch (err) {
    if (err instanceof ApiError) {
      dispatch({ kind: "quest-accept-failed", code: err.code, message: err.body.message });
    }
  }
}

async function submitFile(file: File): Promise<void> {
  const duration = Number(($("ann-end") as HTMLInputElement).value) || 1.9;
  try {
    const response = await api.submitRecording(file, {
      lat: state.position.lat,
      lon: state.position.lon,
      timestamp: new Date().toISOString(),
      annotation: { start_s: 0.0, end_s: duration },
      mode: "service",
    });
    dispatch({ kind: "submit-finished", response });
  } catch (err) {
    const message = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    dispatch({ kind: "submit-failed", code: "upload", message });
  }
}

// ------------------------------------------------------------------ input

const STEP_M = 25;

document.addEventListener("keydown", (event) => {
  switch (event.key.toLowerCase()) {
    case "w":
    case "arrowup":
      dispatch({ kind: "walk", bearingDeg: state.heading, meters: STEP_M });
      break;
    case "s":
    case "arrowdown":
      dispatch({ kind: "walk", bearingDeg: state.heading + 180, meters: STEP_M });
      break;
    case "a":
      dispatch({ kind: "walk", bearingDeg: state.heading - 90, meters: STEP_M });
      break;
    case "d":
      dispatch({ kind: "walk", bearingDeg: state.heading + 90, meters: STEP_M });
      break;
    case "q":
    case "arrowleft":
      dispatch({ kind: "turn", deltaDeg: -15 });
      break;
    case "arrowright":
      dispatch({ kind: "turn", deltaDeg: 15 });
      break;
    case "e":
      dispatch({ kind: "scan" });
      break;
    case "t":
      dispatch({ kind: "tilt" });
      break;
    default:
      return;
  }
  event.preventDefault();
});

$("turn-right").onclick = () => dispatch({ kind: "turn", deltaDeg: 15 });
$("turn-left").onclick = () => dispatch({ kind: "turn", deltaDeg: -15 });
$("scan").onclick = () => dispatch({ kind: "scan" });
$("playback").onclick = () => dispatch({ kind: "toggle-playback" });

$<HTMLInputElement>("file").addEventListener("change", (event) => {
  const input = event.target as HTMLInputElement;
  if (input.files && input.files[0]) void submitFile(input.files[0]);
  input.value = "";
});

function applyScrub(): void {
  const from = ($<HTMLInputElement>("from")).value;
  const to = ($<HTMLInputElement>("to")).value;
  dispatch({
    kind: "scrub",
    from: from ? new Date(from).toISOString() : null,
    to: to ? new Date(to).toISOString() : null,
  });
}
$("from").addEventListener("change", applyScrub);
$("to").addEventListener("change", applyScrub);

// --------------------------------------------------------------- startup

render();
scheduleSceneFetch();
void refreshGame();
