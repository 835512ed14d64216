/**
 * Canvas detection map: a tile grid around the avatar shaded by count,
 * the avatar's heading arrow, and scene sources as bearing markers.
 */

import { tileFor, tileId, tileNeighborhood } from "./geo.js";
import { renderedAzimuth, ExplorerState } from "./state.js";

export const MAP_ZOOM = 12;
export const MAP_GRID = 5;

export function drawMap(canvas: HTMLCanvasElement, state: ExplorerState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const size = canvas.width;
  const cell = size / MAP_GRID;
  ctx.fillStyle = "#0c1713";
  ctx.fillRect(0, 0, size, size);

  const center = tileFor(state.position, MAP_ZOOM);
  const keys = tileNeighborhood(state.position, MAP_ZOOM, MAP_GRID);
  const maxCount = Math.max(1, ...keys.map((k) => state.tiles[tileId(k)]?.total ?? 0));
  for (const key of keys) {
    const counts = state.tiles[tileId(key)];
    const col = key.x - center.x + Math.floor(MAP_GRID / 2);
    const row = key.y - center.y + Math.floor(MAP_GRID / 2);
    if (counts && counts.total > 0) {
      const heat = counts.total / maxCount;
      ctx.fillStyle = `rgba(120, 220, 140, ${0.15 + 0.65 * heat})`;
      ctx.fillRect(col * cell + 1, row * cell + 1, cell - 2, cell - 2);
      ctx.fillStyle = "#eaffea";
      ctx.font = `${Math.round(cell / 4)}px system-ui`;
      ctx.textAlign = "center";
      ctx.fillText(String(counts.total), (col + 0.5) * cell, (row + 0.6) * cell);
    }
    ctx.strokeStyle = "rgba(255,255,255,0.08)";
    ctx.strokeRect(col * cell, row * cell, cell, cell);
  }

  // Scene sources as markers on a bearing ring around the avatar.
  const cx = size / 2;
  const cy = size / 2;
  if (state.scene) {
    state.scene.sources.forEach((source, i) => {
      const azimuth = renderedAzimuth(state, source);
      const angle = ((azimuth - 90) * Math.PI) / 180; // canvas: 0 rad = east
      const ring = cell * (0.8 + Math.min(source.distance_m / 2000, 1.2));
      const x = cx + ring * Math.cos(angle);
      const y = cy + ring * Math.sin(angle);
      const highlighted = state.highlighted.includes(i);
      ctx.beginPath();
      ctx.arc(x, y, highlighted ? 7 : 4, 0, 2 * Math.PI);
      ctx.fillStyle = highlighted ? "#ffd166" : "#7fd4ff";
      ctx.fill();
    });
  }

  // Avatar heading arrow (map is north-up; heading rotates the arrow).
  const theta = ((state.heading - 90) * Math.PI) / 180;
  ctx.beginPath();
  ctx.moveTo(cx + 14 * Math.cos(theta), cy + 14 * Math.sin(theta));
  ctx.lineTo(cx + 8 * Math.cos(theta + 2.5), cy + 8 * Math.sin(theta + 2.5));
  ctx.lineTo(cx + 8 * Math.cos(theta - 2.5), cy + 8 * Math.sin(theta - 2.5));
  ctx.closePath();
  ctx.fillStyle = "#ff6b6b";
  ctx.fill();
}
