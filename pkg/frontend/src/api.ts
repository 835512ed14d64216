/**
 * Typed client for the /v1 API. The only calls that mutate server
 * state are submitRecording and acceptQuest; everything else is a GET.
 */

import { TileKey } from "./geo.js";
import {
  ApiErrorBody,
  Profile,
  Quest,
  RecordingsResponse,
  Scene,
  SubmissionMeta,
  TileCounts,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public body: ApiErrorBody) {
    super(body.message);
  }
  get code(): string {
    return this.body.code;
  }
}

async function parseError(response: Response): Promise<never> {
  let body: ApiErrorBody;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = { code: "unknown", message: response.statusText, retryable: false };
  }
  throw new ApiError(response.status, body);
}

export class ApiClient {
  constructor(public baseUrl: string, public token: string) {}

  private get headers(): Record<string, string> {
    return { Authorization: `Bearer ${this.token}` };
  }

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, { headers: this.headers, signal });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  scene(
    lat: number,
    lon: number,
    heading: number,
    window: { from: string | null; to: string | null },
    species?: string,
    signal?: AbortSignal
  ): Promise<Scene> {
    const params = new URLSearchParams({ lat: String(lat), lon: String(lon), heading: String(heading) });
    if (window.from) params.set("from", window.from);
    if (window.to) params.set("to", window.to);
    if (species) params.set("species", species);
    return this.get(`/v1/scene?${params}`, signal);
  }

  tile(key: TileKey, window: { from: string | null; to: string | null }): Promise<TileCounts> {
    const params = new URLSearchParams();
    if (window.from) params.set("from", window.from);
    if (window.to) params.set("to", window.to);
    const query = params.toString();
    return this.get(`/v1/tiles/${key.zoom}/${key.x}/${key.y}${query ? `?${query}` : ""}`);
  }

  profile(): Promise<Profile> {
    return this.get("/v1/profile");
  }

  quests(): Promise<Quest[]> {
    return this.get<{ quests: Quest[] }>("/v1/quests").then((r) => r.quests);
  }

  bank(speciesId: string): Promise<string[]> {
    return this.get<{ clip_refs: string[] }>(`/v1/species/${speciesId}/bank`).then(
      (r) => r.clip_refs
    );
  }

  async clipAudio(ref: string): Promise<ArrayBuffer> {
    const response = await fetch(`${this.baseUrl}/v1/clips/${ref}`, { headers: this.headers });
    if (!response.ok) await parseError(response);
    return response.arrayBuffer();
  }

  async acceptQuest(questId: string): Promise<Profile> {
    const response = await fetch(`${this.baseUrl}/v1/quests/${questId}/accept`, {
      method: "POST",
      headers: this.headers,
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as Profile;
  }

  async submitRecording(audio: Blob, meta: SubmissionMeta): Promise<RecordingsResponse> {
    const form = new FormData();
    form.append("audio", audio, "recording.wav");
    form.append("meta", JSON.stringify(meta));
    const response = await fetch(`${this.baseUrl}/v1/recordings`, {
      method: "POST",
      headers: this.headers,
      body: form,
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as RecordingsResponse;
  }
}
