/** Client-side geodesy: walking steps and Web-Mercator tile addressing. */

import { normalizeDeg } from "./pan.js";
import { GeoPosition } from "./types.js";

const EARTH_RADIUS_M = 6371008.8;
const MAX_MERCATOR_LAT = 85.05112878;

const rad = (d: number) => (d * Math.PI) / 180;
const deg = (r: number) => (r * 180) / Math.PI;

/** Destination along a great circle; matches the server's point_at. */
export function walk(origin: GeoPosition, bearingDeg: number, meters: number): GeoPosition {
  const delta = meters / EARTH_RADIUS_M;
  const theta = rad(bearingDeg);
  const phi1 = rad(origin.lat);
  const lam1 = rad(origin.lon);
  const phi2 = Math.asin(
    Math.sin(phi1) * Math.cos(delta) + Math.cos(phi1) * Math.sin(delta) * Math.cos(theta)
  );
  const lam2 =
    lam1 +
    Math.atan2(
      Math.sin(theta) * Math.sin(delta) * Math.cos(phi1),
      Math.cos(delta) - Math.sin(phi1) * Math.sin(phi2)
    );
  return { lat: deg(phi2), lon: normalizeDeg(deg(lam2)) };
}

export interface TileKey {
  zoom: number;
  x: number;
  y: number;
}

export function tileFor(position: GeoPosition, zoom: number): TileKey {
  const size = 1 << zoom;
  const x = (position.lon + 180) / 360;
  const lat = Math.max(-MAX_MERCATOR_LAT, Math.min(MAX_MERCATOR_LAT, position.lat));
  const y = (1 - Math.asinh(Math.tan(rad(lat))) / Math.PI) / 2;
  return {
    zoom,
    x: Math.min(Math.max(Math.floor(x * size), 0), size - 1),
    y: Math.min(Math.max(Math.floor(y * size), 0), size - 1),
  };
}

/** The n x n block of tiles centered on a position. */
export function tileNeighborhood(position: GeoPosition, zoom: number, n: number): TileKey[] {
  const center = tileFor(position, zoom);
  const size = 1 << zoom;
  const half = Math.floor(n / 2);
  const keys: TileKey[] = [];
  for (let dy = -half; dy <= half; dy++) {
    for (let dx = -half; dx <= half; dx++) {
      const x = ((center.x + dx) % size + size) % size;
      const y = center.y + dy;
      if (y >= 0 && y < size) keys.push({ zoom, x, y });
    }
  }
  return keys;
}

export const tileId = (t: TileKey) => `${t.zoom}/${t.x}/${t.y}`;
