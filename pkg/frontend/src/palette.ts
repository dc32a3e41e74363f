// Balloon colors: a seeded palette keyed by topic, stable across reloads.

const SATURATION = 0.62;
const LIGHTNESS = 0.58;

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Hue in [0, 360) derived deterministically from the topic key. */
export function topicHue(key: string): number {
  return fnv1a(key) % 360;
}

export function topicColor(key: string): { h: number; s: number; l: number } {
  return { h: topicHue(key), s: SATURATION, l: LIGHTNESS };
}

export function topicCssColor(key: string): string {
  const { h, s, l } = topicColor(key);
  return `hsl(${h}, ${Math.round(s * 100)}%, ${Math.round(l * 100)}%)`;
}
