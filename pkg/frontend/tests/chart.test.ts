import { describe, expect, it } from "vitest";

import { renderOverlay } from "../src/chart.js";
import { assignColors } from "../src/colors.js";

const CURVE_A = {
  recordId: 1,
  label: "X46Cr13 (600 C, 31.6 MPa)",
  times: [0, 100, 200, 300],
  strains: [0, 0.05, 0.12, 0.2],
};
const CURVE_B = {
  recordId: 2,
  label: "HDPE (20 C, 8 MPa)",
  times: [0, 150, 420],
  strains: [0, 0.02, 0.05],
};

describe("renderOverlay", () => {
  it("renders one polyline per record with distinct colors", () => {
    const colors = assignColors([1, 2]);
    const svg = renderOverlay([CURVE_A, CURVE_B], colors);
    const polylines = svg.match(/<polyline /g) ?? [];
    expect(polylines.length).toBe(2);
    expect(svg).toContain(`data-record="1"`);
    expect(svg).toContain(`data-record="2"`);
    expect(colors.get(1)).not.toBe(colors.get(2));
    expect(svg).toContain(colors.get(1)!);
    expect(svg).toContain(colors.get(2)!);
  });

  it("shows the empty-state message with no selection", () => {
    const html = renderOverlay([], new Map());
    expect(html).toContain("empty-state");
    expect(html).not.toContain("<svg");
  });

  it("renders a single-point record as a marker, not a polyline", () => {
    const single = { recordId: 3, label: "dot", times: [10], strains: [0.1] };
    const svg = renderOverlay([single], assignColors([3]));
    expect(svg).toContain("<circle");
    expect(svg).not.toContain("<polyline");
  });

  it("renders error badges without blocking other curves", () => {
    const svg = renderOverlay([CURVE_A], assignColors([1, 9]), { 9: "curve fetch failed" });
    expect(svg).toContain("curve-error");
    expect(svg).toContain("record 9");
    expect((svg.match(/<polyline /g) ?? []).length).toBe(1);
  });

  it("legend carries material + conditions", () => {
    const svg = renderOverlay([CURVE_A], assignColors([1]));
    expect(svg).toContain("X46Cr13 (600 C, 31.6 MPa)");
  });

  it("axes autoscale to the union of selected ranges", () => {
    const svg = renderOverlay([CURVE_A, CURVE_B], assignColors([1, 2]));
    expect(svg).toContain(">400<"); // x ticks span out to curve B's extent
    expect(svg).toContain(">20<"); // strain percent tick covering curve A's max
    // curve B's last point sits on the right plot edge (union drives the scale)
    expect(svg).toContain("704,");
  });

  it("escapes markup in labels", () => {
    const sneaky = { ...CURVE_A, label: "<script>alert(1)</script>" };
    const svg = renderOverlay([sneaky], assignColors([1]));
    expect(svg).not.toContain("<script>");
    expect(svg).toContain("&lt;script&gt;");
  });
});

describe("assignColors", () => {
  it("is pairwise distinct for large selections", () => {
    const ids = Array.from({ length: 24 }, (_, i) => i + 1);
    const colors = assignColors(ids);
    expect(new Set(colors.values()).size).toBe(ids.length);
  });
});
