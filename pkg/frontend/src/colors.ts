/** Deterministic per-record display colors, pairwise distinct within a selection. */

const PALETTE = [
  "#c81e1e",
  "#1e5ac8",
  "#1ea03c",
  "#cd7814",
  "#7a1ec8",
  "#0e8c8c",
];

export function assignColors(recordIds: number[]): Map<number, string> {
  const out = new Map<number, string>();
  recordIds.forEach((id, i) => {
    if (i < PALETTE.length) {
      out.set(id, PALETTE[i]);
    } else {
      // golden-angle hue walk keeps later colors separated
      const hue = Math.round((i * 137.508) % 360);
      out.set(id, `hsl(${hue}, 65%, 42%)`);
    }
  });
  return out;
}
