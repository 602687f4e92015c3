/**
 * Live-service checks:
 *  1. For three canned scenarios, the design-card literals come byte-equal
 *     from the service JSON, and the service body is byte-equal to the
 *     CLI output for the same config.
 *  2. The comparison panel reproduces the c-efficiency ordering between
 *     the dual- and D-criterion designs from live service calls.
 *
 * Spawns the Python service on a scratch port; skips when python or the
 * package is unavailable (set DOSEDESIGN_SKIP_INTEGRATION=1 to force).
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, type DesignRequest } from "../src/api.js";
import { compareScenarios } from "../src/compare.js";
import { extractArrayLiterals, extractScalarLiteral } from "../src/format.js";
import { defaultScenario, type HistoryEntry } from "../src/state.js";

const PY = process.env.DOSEDESIGN_PYTHON ?? "python3";
const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;

function pythonAvailable(): boolean {
  if (process.env.DOSEDESIGN_SKIP_INTEGRATION === "1") return false;
  try {
    execFileSync(PY, ["-c", "import dosedesign"], { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

const available = pythonAvailable();
const maybe = available ? describe : describe.skip;

const POOLED = [2.506, 7.8, -0.979];

function scenarioRequest(
  criterion: string,
  lambda: number,
  nSupport: number,
): DesignRequest {
  return {
    model: "po_trinomial",
    criterion,
    lambda,
    nominals: [POOLED],
    fixed_arms: [],
    include_verdict: false,
    pso: { n_particles: 80, iters: 150, seed: 4, n_support: nSupport },
  };
}

const SCENARIOS: Array<[string, DesignRequest]> = [
  ["D-optimal", scenarioRequest("D", 0.5, 3)],
  ["dual (lambda 0.5)", scenarioRequest("dual", 0.5, 3)],
  ["c-optimal", scenarioRequest("c", 0.0, 2)],
];

function cliDesignOutput(req: DesignRequest, dir: string, tag: string): string {
  const cfg = {
    model: req.model,
    criterion: req.criterion,
    lambda: req.lambda,
    nominals: req.nominals,
    fixed_arms: req.fixed_arms,
    pso: req.pso,
    output_dir: join(dir, `out-${tag}`),
    grid_points: 301,
  };
  const cfgPath = join(dir, `cfg-${tag}.json`);
  writeFileSync(cfgPath, JSON.stringify(cfg));
  return execFileSync(PY, ["-m", "dosedesign.cli", "design", "--config", cfgPath], {
    encoding: "utf-8",
  });
}

maybe("live service parity", () => {
  let proc: ChildProcess;
  const api = new ApiClient(BASE);

  beforeAll(async () => {
    proc = spawn(
      PY,
      ["-c",
       "import uvicorn; from dosedesign.service import app; " +
       `uvicorn.run(app, host='127.0.0.1', port=${PORT}, log_level='error')`],
      { stdio: "ignore" },
    );
    const deadline = Date.now() + 30_000;
    while (Date.now() < deadline) {
      if (await api.health()) return;
      await new Promise((r) => setTimeout(r, 250));
    }
    throw new Error("service did not come up");
  }, 40_000);

  afterAll(() => {
    proc?.kill();
  });

  it(
    "design cards display service values byte-equal to CLI output",
    async () => {
      const dir = mkdtempSync(join(tmpdir(), "dosedesign-ui-"));
      for (const [tag, req] of SCENARIOS) {
        const { payload, rawText } = await api.requestDesign(req);
        // card literals == service body literals
        const shownDoses = extractArrayLiterals(rawText, "points_raw");
        const shownWeights = extractArrayLiterals(rawText, "weights");
        const shownValue = extractScalarLiteral(rawText, "value");
        expect(shownDoses.length).toBe(payload.points_raw.length);
        expect(shownWeights.length).toBe(payload.weights.length);
        expect(shownValue).not.toBeNull();
        for (const lit of [...shownDoses, ...shownWeights, shownValue!]) {
          expect(rawText).toContain(lit);
        }
        // service body == CLI output, byte for byte
        const cliText = cliDesignOutput(req, dir, tag.replace(/\W+/g, "_"));
        expect(cliText.trimEnd()).toBe(rawText.trimEnd());
      }
    },
    240_000,
  );

  it(
    "efficiency panel reproduces the c-efficiency ordering (dual above D)",
    async () => {
      const [dRes, dualRes] = await Promise.all([
        api.requestDesign(SCENARIOS[0][1]),
        api.requestDesign(SCENARIOS[1][1]),
      ]);
      const entry = (label: string, req: DesignRequest, res: typeof dRes): HistoryEntry => ({
        label,
        scenario: defaultScenario(),
        request: req,
        payload: res.payload,
        rawText: res.rawText,
        verify: null,
      });
      const table = await compareScenarios(
        api,
        entry("dual", SCENARIOS[1][1], dualRes),
        entry("D-optimal", SCENARIOS[0][1], dRes),
      );
      // row 0: nominals from the dual scenario, reference = dual design;
      // columns follow [dual, D-optimal]
      const row = table.rows[0];
      expect(row.cEff[0]).toBeCloseTo(1.0, 6);
      expect(row.cEff[1]).toBeLessThan(row.cEff[0]);
      // D-scenario row: the dual design's c-efficiency clips at 1 (it
      // strictly beats the D reference on the c criterion)
      expect(table.rows[1].cEff[0]).toBeCloseTo(1.0, 6);

      // absolute ordering against the one-point c-optimal reference
      const cRes = await api.requestDesign(SCENARIOS[2][1]);
      const [cDual, cD] = await Promise.all([
        api.efficiency({
          model: "po_trinomial", kind: "c", theta: POOLED,
          design: dualRes.payload, reference: cRes.payload,
        }),
        api.efficiency({
          model: "po_trinomial", kind: "c", theta: POOLED,
          design: dRes.payload, reference: cRes.payload,
        }),
      ]);
      expect(cDual).toBeGreaterThan(cD);
      expect(cDual).toBeGreaterThan(0.7);
      expect(cD).toBeLessThan(0.5);
    },
    120_000,
  );
});
