/**
 * Spatialized playback of the active scene through the browser's audio
 * graph: one looped buffer source per virtual source, panned with a
 * left/right gain pair that mirrors the server's constant-power law.
 * No-ops outside a browser (tests run the reducer, not the speakers).
 */

import { ApiClient } from "./api.js";
import { panGains, REAR_ATTENUATION } from "./pan.js";
import { ExplorerState, renderedAzimuth } from "./state.js";
import { VirtualSource } from "./types.js";

interface Voice {
  source: AudioBufferSourceNode;
  left: GainNode;
  right: GainNode;
  spec: VirtualSource;
}

export class ScenePlayer {
  private ctx: AudioContext | null = null;
  private voices = new Map<string, Voice>();
  private buffers = new Map<string, AudioBuffer>();

  constructor(private api: ApiClient) {}

  private context(): AudioContext | null {
    if (this.ctx) return this.ctx;
    const Ctor = (globalThis as { AudioContext?: typeof AudioContext }).AudioContext;
    if (!Ctor) return null;
    this.ctx = new Ctor();
    return this.ctx;
  }

  /** Re-pan running voices after a turn, without refetching audio. */
  repan(state: ExplorerState): void {
    for (const voice of this.voices.values()) {
      this.applyPan(voice, state);
    }
  }

  private applyPan(voice: Voice, state: ExplorerState): void {
    const { left, right, rear } = panGains(renderedAzimuth(state, voice.spec));
    const attenuation = rear ? REAR_ATTENUATION : 1;
    const level = voice.spec.gain * attenuation;
    voice.left.gain.value = level * left;
    voice.right.gain.value = level * right;
  }

  async sync(state: ExplorerState): Promise<void> {
    const ctx = this.context();
    if (!ctx) return;
    const wanted = new Map<string, VirtualSource>();
    if (state.playing && state.scene) {
      for (const source of state.scene.sources) wanted.set(source.clip_ref, source);
    }
    for (const [ref, voice] of this.voices) {
      if (!wanted.has(ref)) {
        voice.source.stop();
        this.voices.delete(ref);
      }
    }
    for (const [ref, spec] of wanted) {
      const existing = this.voices.get(ref);
      if (existing) {
        existing.spec = spec;
        this.applyPan(existing, state);
        continue;
      }
      let buffer = this.buffers.get(ref);
      if (!buffer) {
        try {
          buffer = await ctx.decodeAudioData(await this.api.clipAudio(ref));
        } catch {
          continue; // clip fetch/decode failure never breaks the UI
        }
        this.buffers.set(ref, buffer);
      }
      const node = ctx.createBufferSource();
      node.buffer = buffer;
      node.loop = true;
      node.playbackRate.value = spec.playback_rate * Math.pow(2, spec.spectral_shift_semitones / 12);
      const left = ctx.createGain();
      const right = ctx.createGain();
      const merger = ctx.createChannelMerger(2);
      node.connect(left);
      node.connect(right);
      left.connect(merger, 0, 0);
      right.connect(merger, 0, 1);
      merger.connect(ctx.destination);
      const voice: Voice = { source: node, left, right, spec };
      this.applyPan(voice, state);
      node.start();
      this.voices.set(ref, voice);
    }
  }

  /** One-shot preview of a bank clip (POI tilt). */
  async preview(ref: string): Promise<void> {
    const ctx = this.context();
    if (!ctx) return;
    try {
      const buffer = await ctx.decodeAudioData(await this.api.clipAudio(ref));
      const node = ctx.createBufferSource();
      node.buffer = buffer;
      node.connect(ctx.destination);
      node.start();
    } catch {
      // ignore: preview is best-effort
    }
  }
}
