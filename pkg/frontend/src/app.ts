/**
 * Page wiring: filter panel (left), record table + overlay chart (right),
 * review queue for Flagged entries, export buttons.
 */

import { ApiClient, FilterState, RecordRow, kelvinToCelsius } from "./api.js";
import { renderOverlay, OverlayCurve, OverlayErrors } from "./chart.js";
import { assignColors } from "./colors.js";
import { ReviewFlow } from "./review.js";

const CATEGORIES = [
  "",
  "nickel_alloy",
  "steel_iron",
  "polymer",
  "rock",
  "ice",
  "ceramic",
  "aluminum_alloy",
  "titanium_alloy",
  "metallic_glass",
  "composite",
  "other",
];

type El = HTMLElement;

function el(tag: string, attrs: Record<string, string> = {}, text = ""): El {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

export class App {
  private api = new ApiClient("");
  private state: FilterState = {};
  private records: RecordRow[] = [];
  private selection = new Set<number>();
  private verdictOverrides = new Map<number, string | null>();
  private review = new ReviewFlow(this.api, (id, verdict) => {
    this.verdictOverrides.set(id, verdict);
    void this.refresh(false);
  });

  constructor(private root: El) {}

  async start(): Promise<void> {
    this.root.append(this.buildFilterPanel(), this.buildMainPanel());
    await this.refresh(true);
  }

  private buildFilterPanel(): El {
    const panel = el("aside", { class: "filter-panel" });
    panel.append(el("h2", {}, "Filters"));

    const material = el("input", { id: "f-material", placeholder: "material contains..." });
    const category = el("select", { id: "f-category" });
    for (const c of CATEGORIES) {
      category.append(el("option", { value: c }, c || "any category"));
    }
    const tMin = el("input", { id: "f-tmin", type: "number", placeholder: "T min [C]" });
    const tMax = el("input", { id: "f-tmax", type: "number", placeholder: "T max [C]" });
    const sMin = el("input", { id: "f-smin", type: "number", placeholder: "stress min [MPa]" });
    const sMax = el("input", { id: "f-smax", type: "number", placeholder: "stress max [MPa]" });
    const verdicts = el("div", { class: "verdict-toggles" });
    for (const v of ["Valid", "Valid-TextOnly", "Flagged"]) {
      const label = el("label");
      const box = el("input", { type: "checkbox", value: v }) as HTMLInputElement;
      label.append(box, document.createTextNode(v));
      verdicts.append(label);
    }
    const apply = el("button", { id: "f-apply" }, "Apply");
    apply.addEventListener("click", () => {
      const num = (input: El): number | undefined => {
        const raw = (input as HTMLInputElement).value;
        return raw === "" ? undefined : Number(raw);
      };
      let tMinC = num(tMin);
      let tMaxC = num(tMax);
      if (tMinC !== undefined && tMaxC !== undefined && tMinC > tMaxC) {
        [tMinC, tMaxC] = [tMaxC, tMinC]; // widgets enforce min <= max
      }
      let sMinV = num(sMin);
      let sMaxV = num(sMax);
      if (sMinV !== undefined && sMaxV !== undefined && sMinV > sMaxV) {
        [sMinV, sMaxV] = [sMaxV, sMinV];
      }
      this.state = {
        material: (material as HTMLInputElement).value || undefined,
        category: (category as HTMLSelectElement).value || undefined,
        tMinC,
        tMaxC,
        sMinMPa: sMinV,
        sMaxMPa: sMaxV,
        verdicts: Array.from(verdicts.querySelectorAll("input:checked")).map(
          (b) => (b as HTMLInputElement).value,
        ),
      };
      void this.refresh(true);
    });

    const exports = el("div", { class: "export-buttons" });
    const csvBtn = el("button", {}, "Export CSV");
    csvBtn.addEventListener("click", () => {
      window.location.href = this.api.exportUrl(this.state, "csv");
    });
    const dataBtn = el("button", {}, "Export data");
    dataBtn.addEventListener("click", () => {
      window.location.href = this.api.exportUrl(this.state, "data");
    });
    exports.append(csvBtn, dataBtn);

    panel.append(material, category, tMin, tMax, sMin, sMax, verdicts, apply, exports);
    return panel;
  }

  private buildMainPanel(): El {
    const main = el("main", { class: "main-panel" });
    main.append(
      el("div", { id: "record-table" }),
      el("div", { id: "chart" }),
      el("section", { id: "review-queue" }),
    );
    return main;
  }

  private async refresh(refetch: boolean): Promise<void> {
    if (refetch) {
      this.records = await this.api.records(this.state);
      this.verdictOverrides.clear();
    }
    this.renderTable();
    await this.renderChart();
    this.renderReviewQueue();
  }

  private effectiveVerdict(rec: RecordRow): string | null {
    return this.verdictOverrides.has(rec.record_id)
      ? this.verdictOverrides.get(rec.record_id)!
      : rec.verdict;
  }

  private renderTable(): void {
    const host = this.root.querySelector("#record-table")!;
    host.textContent = "";
    const table = el("table");
    const head = el("tr");
    for (const h of ["plot", "id", "material", "category", "T [C]", "stress [MPa]", "model", "verdict", "r2"]) {
      head.append(el("th", {}, h));
    }
    table.append(head);
    for (const rec of this.records) {
      const verdict = this.effectiveVerdict(rec);
      if (verdict === null) {
        continue; // rejected via review: gone from default views
      }
      const row = el("tr", { "data-record": String(rec.record_id) });
      const toggle = el("input", { type: "checkbox" }) as HTMLInputElement;
      toggle.checked = this.selection.has(rec.record_id);
      toggle.addEventListener("change", () => {
        if (toggle.checked) {
          this.selection.add(rec.record_id);
        } else {
          this.selection.delete(rec.record_id);
        }
        void this.renderChart();
      });
      const cell = el("td");
      cell.append(toggle);
      row.append(cell);
      row.append(
        el("td", {}, String(rec.record_id)),
        el("td", {}, rec.material),
        el("td", {}, rec.category),
        el("td", {}, String(kelvinToCelsius(rec.temperature_K))),
        el("td", {}, String(rec.stress_MPa)),
        el("td", {}, rec.model_name),
        el("td", { class: `verdict-${verdict}` }, verdict),
        el("td", {}, rec.r2 === null ? "" : rec.r2.toFixed(4)),
      );
      table.append(row);
    }
    host.append(table);
  }

  private async renderChart(): Promise<void> {
    const host = this.root.querySelector("#chart")!;
    const ids = Array.from(this.selection).sort((a, b) => a - b);
    const curves: OverlayCurve[] = [];
    const errors: OverlayErrors = {};
    for (const id of ids) {
      const rec = this.records.find((r) => r.record_id === id);
      try {
        const curve = await this.api.curve(id);
        if (curve.times.length === 0) {
          errors[id] = "no digitized curve";
          continue;
        }
        curves.push({
          recordId: id,
          label: rec
            ? `${rec.material} (${kelvinToCelsius(rec.temperature_K)} C, ${rec.stress_MPa} MPa)`
            : `record ${id}`,
          times: curve.times,
          strains: curve.strains,
        });
      } catch (err) {
        errors[id] = String(err);
      }
    }
    host.innerHTML = renderOverlay(curves, assignColors(ids), errors);
  }

  private renderReviewQueue(): void {
    const host = this.root.querySelector("#review-queue")!;
    host.textContent = "";
    host.append(el("h2", {}, "Review queue"));
    const flagged = this.records.filter((r) => this.effectiveVerdict(r) === "Flagged");
    if (flagged.length === 0) {
      host.append(el("p", { class: "empty" }, "No flagged records."));
      return;
    }
    for (const rec of flagged) {
      const row = el("div", { class: "review-row", "data-record": String(rec.record_id) });
      row.append(
        el("span", {}, `#${rec.record_id} ${rec.material} (r2 ${rec.r2?.toFixed(3) ?? "n/a"})`),
      );
      const note = el("input", { placeholder: "reviewer note" }) as HTMLInputElement;
      const approve = el("button", {}, "Approve");
      approve.addEventListener("click", () => {
        void this.review.submit(rec, "approve", note.value);
      });
      const reject = el("button", {}, "Reject");
      reject.addEventListener("click", () => {
        void this.review.submit(rec, "reject", note.value);
      });
      row.append(note, approve, reject);
      host.append(row);
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new App(document.getElementById("app")!);
  void app.start();
}
