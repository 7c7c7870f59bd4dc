/**
 * Contract tests against the real backend: fixture corpus -> pipeline ->
 * served API. Verifies that buildQuery strings mean the same thing to
 * the server, that review transitions behave Flagged->Valid /
 * Flagged->Rejected, and that UI export bytes equal CLI export bytes.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, buildQuery } from "../src/api.js";

const PY = process.env.PYTHON ?? "python3";
const BASE_PORT = 18000 + (process.pid % 500);

let workdir: string;
const servers: ChildProcess[] = [];

function py(args: string[]): string {
  return execFileSync(PY, args, { encoding: "utf-8", cwd: workdir });
}

async function startServer(db: string, port: number): Promise<void> {
  const child = spawn(PY, ["-m", "creepdb.cli", "serve", "--db", db, "--port", String(port)], {
    cwd: workdir,
    stdio: "ignore",
  });
  servers.push(child);
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`http://127.0.0.1:${port}/api/stats`);
      if (resp.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`server on :${port} did not come up`);
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "creepdb-ui-"));
  py(["-m", "creepdb.fixtures", "fx"]);
  for (const db of ["approve.db", "reject.db"]) {
    py([
      "-m",
      "creepdb.cli",
      "run",
      "--corpus",
      "fx/manifest.jsonl",
      "--backend",
      "scripted:fx/replies.json",
      "--db",
      db,
    ]);
  }
  await Promise.all([
    startServer("approve.db", BASE_PORT),
    startServer("reject.db", BASE_PORT + 1),
  ]);
}, 120_000);

afterAll(() => {
  for (const child of servers) {
    child.kill("SIGTERM");
  }
  if (workdir) {
    rmSync(workdir, { recursive: true, force: true });
  }
});

function client(port: number): ApiClient {
  return new ApiClient(`http://127.0.0.1:${port}`);
}

describe("filter contract", () => {
  it("buildQuery degC range matches the server's kelvin filtering", async () => {
    const query = buildQuery({ category: "steel_iron", tMinC: 600, tMaxC: 600 });
    expect(query).toBe("category=steel_iron&t_min_K=873.15&t_max_K=873.15");
    const rows = await client(BASE_PORT).records({
      category: "steel_iron",
      tMinC: 600,
      tMaxC: 600,
    });
    expect(rows.length).toBe(1);
    expect(rows[0].material).toBe("X46Cr13");
    expect(rows[0].temperature_K).toBe(873.15);
  });

  it("unfiltered query returns every stored record", async () => {
    const rows = await client(BASE_PORT).records({});
    expect(rows.length).toBe(5); // 4 valid + 1 flagged
  });

  it("curves are fetchable for plotted records", async () => {
    const api = client(BASE_PORT);
    const rows = await api.records({ category: "metallic_glass" });
    const curve = await api.curve(rows[0].record_id);
    expect(curve.times.length).toBeGreaterThan(100);
    expect(curve.times.length).toBe(curve.strains.length);
  });
});

describe("review contract", () => {
  it("approve transitions exactly Flagged -> Valid (second call conflicts)", async () => {
    const api = client(BASE_PORT);
    const flagged = await api.records({ verdicts: ["Flagged"] });
    expect(flagged.length).toBe(1);
    const id = flagged[0].record_id;

    const first = await api.review(id, "approve", "looks consistent enough");
    expect(first.status).toBe(200);
    const after = await api.records({ verdicts: ["Valid"] });
    const promoted = after.find((r) => r.record_id === id);
    expect(promoted).toBeDefined();
    expect(promoted!.params_source.endsWith("human-approved")).toBe(true);
    expect((await api.records({ verdicts: ["Flagged"] })).length).toBe(0);

    const second = await api.review(id, "approve");
    expect(second.status).toBe(409);
  });

  it("reject transitions Flagged -> Rejected (record leaves all views)", async () => {
    const api = client(BASE_PORT + 1);
    const flagged = await api.records({ verdicts: ["Flagged"] });
    expect(flagged.length).toBe(1);
    const id = flagged[0].record_id;

    const resp = await api.review(id, "reject", "parameters inconsistent with figure");
    expect(resp.status).toBe(200);
    expect((resp.body as { removed: boolean }).removed).toBe(true);
    const all = await api.records({});
    expect(all.find((r) => r.record_id === id)).toBeUndefined();
    const curve = await fetch(`http://127.0.0.1:${BASE_PORT + 1}/api/records/${id}/curve`);
    expect(curve.status).toBe(404);
  });
});

describe("export contract", () => {
  it("UI export bytes equal CLI export bytes for the same filter", async () => {
    const api = client(BASE_PORT + 1);
    const url = api.exportUrl({ category: "polymer" }, "csv");
    const viaHttp = Buffer.from(await (await fetch(url)).arrayBuffer());
    py([
      "-m",
      "creepdb.cli",
      "export",
      "--db",
      "reject.db",
      "--category",
      "polymer",
      "--out",
      "cli_export.csv",
    ]);
    const viaCli = readFileSync(join(workdir, "cli_export.csv"));
    expect(viaHttp.equals(viaCli)).toBe(true);
  });

  it("holds for the unfiltered structured-text export too", async () => {
    const api = client(BASE_PORT + 1);
    const viaHttp = Buffer.from(
      await (await fetch(api.exportUrl({}, "data"))).arrayBuffer(),
    );
    py([
      "-m",
      "creepdb.cli",
      "export",
      "--db",
      "reject.db",
      "--format",
      "data",
      "--out",
      "cli_export.json",
    ]);
    const viaCli = readFileSync(join(workdir, "cli_export.json"));
    expect(viaHttp.equals(viaCli)).toBe(true);
  });
});
