/**
 * Fixed palettes (the UI's color contract):
 *  - confusion matrix: sequential light-to-dark blue; count 0 is white,
 *    count 1 the lightest visible shade, the maximum the darkest; an
 *    optional log mapping amplifies small counts without reordering them.
 *  - response map: black to light blue below the threshold, saturated
 *    yellow at or above it.
 *  - metric deltas: red-white diverging (drops in red).
 *  - group metrics: white-to-green sequential.
 */

export const MATRIX_HUE = 214; // blue
export const MATRIX_LIGHT = 0.92;
export const MATRIX_DARK = 0.18;
export const SATURATION_COLOR = '#ffd21f'; // response cells >= threshold
export const PLACEHOLDER_TILE = '#d8d8d8';

function hsl(h: number, s: number, l: number): string {
  return `hsl(${h}, ${Math.round(s * 100)}%, ${Math.round(l * 100)}%)`;
}

/**
 * Normalized darkness of a confusion count in (0, 1]; monotone in the
 * count under both linear and logarithmic mappings.
 */
export function matrixIntensity(value: number, max: number, log: boolean): number {
  if (value <= 0) return 0;
  if (max <= 1) return 1;
  if (log) {
    return Math.log(value) / Math.log(max) * (1 - 1 / max) + 1 / max;
  }
  return value / max;
}

/** Sequential ramp: intensity 0 -> white, tiny -> light shade, 1 -> dark. */
export function matrixColor(value: number, max: number, log: boolean): string {
  const t = matrixIntensity(value, max, log);
  if (t <= 0) return '#ffffff';
  const lightness = MATRIX_LIGHT - t * (MATRIX_LIGHT - MATRIX_DARK);
  return hsl(MATRIX_HUE, 0.65, lightness);
}

/** Response ramp: below-threshold values map black -> light blue. */
export function responseColor(value: number, threshold: number, peak: number): string {
  if (value >= threshold) return SATURATION_COLOR;
  const ceiling = Math.min(threshold, peak);
  const t = ceiling > 0 ? Math.max(value, 0) / ceiling : 0;
  return hsl(205, 0.85, 0.05 + 0.75 * Math.min(t, 1));
}

/** Diverging red-white scale for metric deltas; drops are red. */
export function deltaColor(delta: number): string {
  if (delta >= 0) {
    const t = Math.min(delta, 1);
    return hsl(145, 0.5, 0.97 - 0.35 * t);
  }
  const t = Math.min(-delta, 1);
  return hsl(4, 0.78, 0.96 - 0.45 * t);
}

/** Sequential white-to-green scale for metric values in [0, 1]. */
export function metricColor(value: number): string {
  const t = Math.max(0, Math.min(value, 1));
  return hsl(145, 0.45, 0.96 - 0.5 * t);
}

/** Header tint for a neuron relevance value; +inf pins to the darkest. */
export function relevanceColor(value: number | 'inf', maxFinite: number): string {
  const t = value === 'inf' ? 1
    : maxFinite > 0 ? Math.min(value / maxFinite, 1) : 0;
  return hsl(28, 0.85, 0.93 - 0.55 * t);
}
