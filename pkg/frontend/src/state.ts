/**
 * Scenario editing state and client-side validation.
 *
 * Validation mirrors the service rules so invalid scenarios never leave
 * the browser: numeric nominal grid with one row per nominal set,
 * criterion weights inside [0, 1], nonnegative fixed-arm weights that
 * leave free design mass, and (for forwarded designs) weights on the
 * probability simplex.
 */

import type { DesignPayload, DesignRequest, VerifyPayload } from "./api.js";

export const MODELS = [
  "po_trinomial",
  "cr_trinomial",
  "ac_trinomial",
  "rich_trinomial",
] as const;

export const CRITERIA = ["D", "c", "dual", "robust_D", "robust_dual"] as const;

export interface FixedArmInput {
  doseRaw: string;
  weight: string;
}

export interface ScenarioState {
  model: string;
  criterion: (typeof CRITERIA)[number];
  lambda: number;
  /** editable grid: one row per nominal set, entries as typed */
  nominals: string[][];
  fixedArms: FixedArmInput[];
  seed: number;
  nParticles: number;
  iters: number;
  nSupport: number | null;
}

export interface HistoryEntry {
  label: string;
  scenario: ScenarioState;
  request: DesignRequest;
  payload: DesignPayload;
  rawText: string;
  verify: VerifyPayload | null;
}

export function defaultScenario(): ScenarioState {
  return {
    model: "po_trinomial",
    criterion: "D",
    lambda: 0.5,
    nominals: [["2.506", "7.800", "-0.979"]],
    fixedArms: [],
    seed: 0,
    nParticles: 150,
    iters: 300,
    nSupport: 3,
  };
}

export type Validation =
  | { ok: true; request: DesignRequest }
  | { ok: false; errors: string[] };

function parseFinite(cell: string): number | null {
  if (cell.trim() === "") return null;
  const v = Number(cell);
  return Number.isFinite(v) ? v : null;
}

export function validateScenario(s: ScenarioState): Validation {
  const errors: string[] = [];
  if (!MODELS.includes(s.model as (typeof MODELS)[number])) {
    errors.push(`unknown model '${s.model}'`);
  }
  if (!(s.lambda >= 0 && s.lambda <= 1)) {
    errors.push("lambda must lie in [0, 1]");
  }
  if (s.nominals.length < 1) {
    errors.push("at least one nominal set is required");
  }
  const width = s.nominals[0]?.length ?? 0;
  const nominals: number[][] = [];
  s.nominals.forEach((row, i) => {
    if (row.length !== width) {
      errors.push(`nominal row ${i + 1} has ${row.length} entries, expected ${width}`);
      return;
    }
    const parsed = row.map(parseFinite);
    const bad = parsed.findIndex((v) => v === null);
    if (bad >= 0) {
      errors.push(`nominal row ${i + 1}, column ${bad + 1} is not a number`);
      return;
    }
    nominals.push(parsed as number[]);
  });
  const arms: number[][] = [];
  let armMass = 0;
  s.fixedArms.forEach((arm, i) => {
    const dose = parseFinite(arm.doseRaw);
    const w = parseFinite(arm.weight);
    if (dose === null || dose < 0) errors.push(`fixed arm ${i + 1}: bad dose`);
    if (w === null || w < 0) errors.push(`fixed arm ${i + 1}: bad weight`);
    if (dose !== null && w !== null && dose >= 0 && w >= 0) {
      arms.push([dose, w]);
      armMass += w;
    }
  });
  if (armMass >= 1) {
    errors.push("fixed arms exhaust the design mass (weights must sum below 1)");
  }
  if (!Number.isInteger(s.seed)) errors.push("seed must be an integer");
  if (s.nParticles < 2) errors.push("need at least 2 particles");
  if (s.iters < 1) errors.push("need at least one iteration");
  if (errors.length > 0) return { ok: false, errors };
  const pso: DesignRequest["pso"] = {
    n_particles: s.nParticles,
    iters: s.iters,
    seed: s.seed,
  };
  if (s.nSupport !== null) pso.n_support = s.nSupport;
  return {
    ok: true,
    request: {
      model: s.model,
      criterion: s.criterion,
      lambda: s.lambda,
      nominals,
      fixed_arms: arms,
      include_verdict: false,
      pso,
    },
  };
}

/** Simplex guard for any design forwarded back to the service. */
export function designOnSimplex(payload: DesignPayload, tol = 1e-9): boolean {
  const weights = payload.weights ?? [];
  const armW = (payload.fixed_arms ?? []).map((a) => a.weight);
  if ([...weights, ...armW].some((w) => !(w >= 0))) return false;
  const total = [...weights, ...armW].reduce((a, b) => a + b, 0);
  return Math.abs(total - 1) <= tol;
}

/** Scenario theta used for efficiency comparisons: the first nominal set. */
export function scenarioTheta(entry: HistoryEntry): number[] {
  return entry.request.nominals[0];
}
