/**
 * Overlay chart: strain-time polylines for the selected records,
 * rendered as a self-contained SVG string (pure function, no DOM).
 *
 * Axes auto-scale to the union of the selected curves; strain displays
 * in percent, time in seconds. A record whose curve failed to load
 * renders as an error badge without blocking the others.
 */

export interface OverlayCurve {
  recordId: number;
  label: string; // material + conditions
  times: number[];
  strains: number[];
}

export interface OverlayErrors {
  [recordId: number]: string;
}

export interface OverlayOptions {
  width?: number;
  height?: number;
}

const MARGIN = { left: 64, right: 16, top: 16, bottom: 42 };

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) {
    ticks.push(Math.round(v / s) * s);
  }
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.001) return v.toExponential(1);
  return String(Math.round(v * 1000) / 1000);
}

export function renderOverlay(
  curves: OverlayCurve[],
  colors: Map<number, string>,
  errors: OverlayErrors = {},
  options: OverlayOptions = {},
): string {
  const badges = Object.entries(errors)
    .map(
      ([id, msg]) =>
        `<span class="curve-error" data-record="${id}">record ${id}: ${escapeHtml(msg)}</span>`,
    )
    .join("");

  if (curves.length === 0) {
    const note = badges || "";
    return `<div class="empty-state">No records selected - pick rows on the left to overlay their creep curves.${note}</div>`;
  }

  const width = options.width ?? 720;
  const height = options.height ?? 460;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  let tLo = Infinity;
  let tHi = -Infinity;
  let sLo = Infinity;
  let sHi = -Infinity;
  for (const c of curves) {
    for (const t of c.times) {
      tLo = Math.min(tLo, t);
      tHi = Math.max(tHi, t);
    }
    for (const s of c.strains) {
      sLo = Math.min(sLo, 100 * s); // display percent
      sHi = Math.max(sHi, 100 * s);
    }
  }
  if (!(tHi > tLo)) {
    tHi = tLo + 1;
  }
  if (!(sHi > sLo)) {
    sHi = sLo + 1;
  }
  const sPad = (sHi - sLo) * 0.05;
  sLo -= sPad;
  sHi += sPad;

  const x = (t: number) => MARGIN.left + ((t - tLo) / (tHi - tLo)) * plotW;
  const y = (s: number) => MARGIN.top + (1 - (s - sLo) / (sHi - sLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg class="overlay-chart" viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg" role="img">`,
  );
  // axes
  parts.push(
    `<line class="axis" x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${
      MARGIN.top + plotH
    }"/>`,
    `<line class="axis" x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${
      MARGIN.left + plotW
    }" y2="${MARGIN.top + plotH}"/>`,
  );
  for (const tick of niceTicks(tLo, tHi)) {
    const px = x(tick);
    parts.push(
      `<line class="grid" x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${MARGIN.top + plotH}"/>`,
      `<text class="tick" x="${px}" y="${height - 22}" text-anchor="middle">${fmt(tick)}</text>`,
    );
  }
  for (const tick of niceTicks(sLo, sHi)) {
    const py = y(tick);
    parts.push(
      `<line class="grid" x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" y2="${py}"/>`,
      `<text class="tick" x="${MARGIN.left - 8}" y="${py + 4}" text-anchor="end">${fmt(tick)}</text>`,
    );
  }
  parts.push(
    `<text class="axis-label" x="${MARGIN.left + plotW / 2}" y="${height - 4}" text-anchor="middle">time [s]</text>`,
    `<text class="axis-label" x="14" y="${MARGIN.top + plotH / 2}" transform="rotate(-90 14 ${
      MARGIN.top + plotH / 2
    })" text-anchor="middle">strain [%]</text>`,
  );

  // one polyline (or a lone marker) per record
  for (const c of curves) {
    const color = colors.get(c.recordId) ?? "#333";
    if (c.times.length === 1) {
      parts.push(
        `<circle class="curve-point" data-record="${c.recordId}" cx="${x(c.times[0])}" cy="${y(
          100 * c.strains[0],
        )}" r="4" fill="${color}"/>`,
      );
      continue;
    }
    const points = c.times.map((t, i) => `${x(t)},${y(100 * c.strains[i])}`).join(" ");
    parts.push(
      `<polyline class="curve" data-record="${c.recordId}" fill="none" stroke="${color}" stroke-width="2" points="${points}"/>`,
    );
  }

  // legend
  curves.forEach((c, i) => {
    const color = colors.get(c.recordId) ?? "#333";
    const ly = MARGIN.top + 14 + 18 * i;
    parts.push(
      `<rect class="legend-swatch" x="${MARGIN.left + 10}" y="${ly - 9}" width="12" height="12" fill="${color}"/>`,
      `<text class="legend" x="${MARGIN.left + 28}" y="${ly}">${escapeHtml(c.label)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("") + badges;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
