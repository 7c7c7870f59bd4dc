/**
 * API client and filter-state handling.
 *
 * Display units are degC and percent strain; the API speaks canonical
 * units (K, MPa, strain fraction), so the only client-side arithmetic is
 * the degC -> K offset and the percent <-> fraction display conversion.
 */

export interface FilterState {
  material?: string;
  category?: string;
  tMinC?: number; // display: degC
  tMaxC?: number;
  sMinMPa?: number;
  sMaxMPa?: number;
  verdicts?: string[];
}

export interface RecordRow {
  record_id: number;
  doi: string;
  material: string;
  category: string;
  temperature_K: number;
  stress_MPa: number;
  model_name: string;
  params: Record<string, { value: number; unit: string }>;
  params_source: string;
  verdict: string;
  r2: number | null;
  n_points: number;
}

export interface CurvePayload {
  record_id: number;
  material: string;
  temperature_K: number;
  stress_MPa: number;
  times: number[];
  strains: number[];
  flags: string[];
}

export function celsiusToKelvin(c: number): number {
  // exact for inputs with <= 2 decimals; keeps 600 -> 873.15 byte-stable
  return Math.round((c + 273.15) * 100) / 100;
}

export function kelvinToCelsius(k: number): number {
  return Math.round((k - 273.15) * 100) / 100;
}

/** Only set fields are emitted; temperatures convert to kelvin. */
export function buildQuery(state: FilterState): string {
  const parts: string[] = [];
  if (state.material !== undefined && state.material !== "") {
    parts.push(`material=${encodeURIComponent(state.material)}`);
  }
  if (state.category !== undefined && state.category !== "") {
    parts.push(`category=${encodeURIComponent(state.category)}`);
  }
  if (state.tMinC !== undefined) {
    parts.push(`t_min_K=${celsiusToKelvin(state.tMinC)}`);
  }
  if (state.tMaxC !== undefined) {
    parts.push(`t_max_K=${celsiusToKelvin(state.tMaxC)}`);
  }
  if (state.sMinMPa !== undefined) {
    parts.push(`s_min_MPa=${state.sMinMPa}`);
  }
  if (state.sMaxMPa !== undefined) {
    parts.push(`s_max_MPa=${state.sMaxMPa}`);
  }
  for (const v of state.verdicts ?? []) {
    parts.push(`verdict=${encodeURIComponent(v)}`);
  }
  return parts.join("&");
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (...a) => fetch(...a),
  ) {}

  private url(path: string, query = ""): string {
    return this.base + path + (query ? `?${query}` : "");
  }

  async records(state: FilterState = {}): Promise<RecordRow[]> {
    const resp = await this.fetchFn(this.url("/api/records", buildQuery(state)));
    if (!resp.ok) {
      throw new Error(`records query failed: ${resp.status}`);
    }
    const body = (await resp.json()) as { records: RecordRow[] };
    return body.records;
  }

  async curve(recordId: number): Promise<CurvePayload> {
    const resp = await this.fetchFn(this.url(`/api/records/${recordId}/curve`));
    if (!resp.ok) {
      throw new Error(`curve ${recordId} failed: ${resp.status}`);
    }
    return (await resp.json()) as CurvePayload;
  }

  async stats(): Promise<Record<string, unknown>> {
    const resp = await this.fetchFn(this.url("/api/stats"));
    if (!resp.ok) {
      throw new Error(`stats failed: ${resp.status}`);
    }
    return (await resp.json()) as Record<string, unknown>;
  }

  /** Returns the HTTP status so callers can treat 409 as a soft conflict. */
  async review(
    recordId: number,
    action: "approve" | "reject",
    note = "",
  ): Promise<{ status: number; body: unknown }> {
    const resp = await this.fetchFn(this.url("/api/review"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ record_id: recordId, action, note }),
    });
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    return { status: resp.status, body };
  }

  /** Download URLs hand back the server's export bytes unmodified. */
  exportUrl(state: FilterState, format: "csv" | "data"): string {
    return this.url(`/api/export.${format}`, buildQuery(state));
  }
}
