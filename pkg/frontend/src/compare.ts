/**
 * Scenario comparison: D- and c-efficiency of each history design under
 * each scenario's nominal values, with that scenario's own design as the
 * reference (so a scenario's own column is 1 by construction and
 * identical scenarios give an all-ones table).  Every number comes from
 * the service efficiency endpoint.
 */

import type { ApiClient } from "./api.js";
import type { HistoryEntry } from "./state.js";
import { scenarioTheta } from "./state.js";

export interface CompareRow {
  context: string;
  dEff: number[];
  cEff: number[];
}

export interface CompareTable {
  designs: string[];
  rows: CompareRow[];
}

export async function compareScenarios(
  api: ApiClient,
  a: HistoryEntry,
  b: HistoryEntry,
): Promise<CompareTable> {
  if (a.scenario.model !== b.scenario.model) {
    throw new Error(
      `scenarios use different models (${a.scenario.model} vs ${b.scenario.model})`,
    );
  }
  const entries = [a, b];
  const rows: CompareRow[] = [];
  for (const context of entries) {
    const theta = scenarioTheta(context);
    const dEff: number[] = [];
    const cEff: number[] = [];
    for (const candidate of entries) {
      dEff.push(
        await api.efficiency({
          model: context.scenario.model,
          kind: "D",
          theta,
          design: candidate.payload,
          reference: context.payload,
        }),
      );
      cEff.push(
        await api.efficiency({
          model: context.scenario.model,
          kind: "c",
          theta,
          design: candidate.payload,
          reference: context.payload,
        }),
      );
    }
    rows.push({ context: context.label, dEff, cEff });
  }
  return { designs: entries.map((e) => e.label), rows };
}
