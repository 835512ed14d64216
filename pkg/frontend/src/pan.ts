/**
 * Constant-power stereo panning, mirroring the server's formula exactly:
 * rear azimuths fold onto the front hemisphere with a rear flag, then
 * theta = (a + 90) / 180 * pi/2, left = cos(theta), right = sin(theta),
 * so left^2 + right^2 = 1 for every azimuth.
 */

export interface PanGains {
  left: number;
  right: number;
  rear: boolean;
}

export const REAR_ATTENUATION = 1 / Math.SQRT2; // 3 dB, applied at playback

export function normalizeDeg(angle: number): number {
  let a = (angle + 180) % 360;
  if (a < 0) a += 360;
  return a - 180;
}

export function panGains(azimuthDeg: number): PanGains {
  let a = normalizeDeg(azimuthDeg);
  const rear = Math.abs(a) > 90;
  if (a > 90) a = 180 - a;
  else if (a < -90) a = -180 - a;
  const theta = ((a + 90) / 180) * (Math.PI / 2);
  return { left: Math.cos(theta), right: Math.sin(theta), rear };
}
