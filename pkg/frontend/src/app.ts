/**
 * DOM wiring for the exploration console.  All numerics come from the
 * service; this module only moves strings between inputs, requests and
 * rendered cards.
 */

import { ApiClient, type DesignPayload, type VerifyPayload } from "./api.js";
import { sensitivitySvg, weightsBarSvg } from "./chart.js";
import { compareScenarios } from "./compare.js";
import { approx, extractArrayLiterals, extractScalarLiteral, formatPercent } from "./format.js";
import { RequestSequencer } from "./sequence.js";
import {
  CRITERIA,
  MODELS,
  defaultScenario,
  type HistoryEntry,
  type ScenarioState,
  validateScenario,
} from "./state.js";

const api = new ApiClient(
  (window as unknown as { DOSEDESIGN_API?: string }).DOSEDESIGN_API ?? "",
);
const designSeq = new RequestSequencer();
const compareSeq = new RequestSequencer();

let scenario: ScenarioState = defaultScenario();
const history: HistoryEntry[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderNominalGrid(): void {
  const table = el<HTMLTableElement>("nominal-grid");
  table.innerHTML = "";
  scenario.nominals.forEach((row, i) => {
    const tr = document.createElement("tr");
    row.forEach((cell, j) => {
      const td = document.createElement("td");
      const input = document.createElement("input");
      input.value = cell;
      input.size = 8;
      input.addEventListener("input", () => {
        scenario.nominals[i][j] = input.value;
        input.classList.toggle(
          "invalid",
          input.value.trim() !== "" && !Number.isFinite(Number(input.value)),
        );
      });
      td.appendChild(input);
      tr.appendChild(td);
    });
    const rm = document.createElement("button");
    rm.textContent = "−";
    rm.title = "remove nominal set";
    rm.addEventListener("click", () => {
      scenario.nominals.splice(i, 1);
      renderNominalGrid();
    });
    const td = document.createElement("td");
    td.appendChild(rm);
    tr.appendChild(td);
    table.appendChild(tr);
  });
}

function renderArms(): void {
  const box = el<HTMLDivElement>("arm-list");
  box.innerHTML = "";
  scenario.fixedArms.forEach((arm, i) => {
    const row = document.createElement("div");
    row.className = "arm-row";
    const dose = document.createElement("input");
    dose.value = arm.doseRaw;
    dose.size = 8;
    dose.addEventListener("input", () => (arm.doseRaw = dose.value));
    const weight = document.createElement("input");
    weight.value = arm.weight;
    weight.size = 6;
    weight.addEventListener("input", () => (arm.weight = weight.value));
    const rm = document.createElement("button");
    rm.textContent = "−";
    rm.addEventListener("click", () => {
      scenario.fixedArms.splice(i, 1);
      renderArms();
    });
    row.append("dose (raw) ", dose, " weight ", weight, rm);
    box.appendChild(row);
  });
}

export function renderDesignCard(
  card: HTMLElement,
  payload: DesignPayload,
  rawText: string,
  verify: VerifyPayload | null,
): void {
  const rawDoses = extractArrayLiterals(rawText, "points_raw");
  const transformed = extractArrayLiterals(rawText, "points_transformed");
  const weights = extractArrayLiterals(rawText, "weights");
  const value = extractScalarLiteral(rawText, "value");
  const rows = rawDoses
    .map(
      (d, i) =>
        `<tr><td class="raw-dose">${d}</td><td class="transformed-dose">${transformed[i] ?? ""}</td>` +
        `<td class="weight">${weights[i] ?? ""}</td>` +
        `<td class="weight-approx">${formatPercent(payload.weights[i] ?? 0)}</td></tr>`,
    )
    .join("");
  const arms = (payload.fixed_arms ?? [])
    .map(
      (a) =>
        `<tr class="arm"><td>${a.dose_raw}</td><td>${a.dose_transformed}</td>` +
        `<td>${a.weight}</td><td>${formatPercent(a.weight)}</td></tr>`,
    )
    .join("");
  const verdict = verify
    ? `<span class="badge ${verify.verdict === "optimal" ? "ok" : "bad"}">` +
      `${verify.verdict === "optimal" ? "OPTIMAL" : "NOT OPTIMAL"}</span>` +
      ` <span class="note">max sensitivity ${approx(verify.max_value)}</span>`
    : "";
  card.innerHTML =
    `<h3>${payload.criterion ?? "design"} design ${verdict}</h3>` +
    `<p>criterion value <code class="criterion-value">${value ?? ""}</code></p>` +
    `<table class="design-table"><thead><tr><th>dose (raw)</th>` +
    `<th>dose (transformed)</th><th>weight</th><th>approx</th></tr></thead>` +
    `<tbody>${rows}${arms}</tbody></table>` +
    `<div class="weights-chart">${weightsBarSvg(
      [...payload.weights, ...(payload.fixed_arms ?? []).map((a) => a.weight)],
      [
        ...payload.points_raw.map((d) => approx(d)),
        ...(payload.fixed_arms ?? []).map((a) => approx(a.dose_raw)),
      ],
    )}</div>` +
    (verify
      ? `<div class="sensitivity-chart">${sensitivitySvg({
          grid: verify.grid_transformed,
          values: verify.values,
          support: [
            ...payload.points_transformed,
            ...(payload.fixed_arms ?? []).map((a) => a.dose_transformed),
          ],
        })}</div>`
      : "");
}

function renderHistory(): void {
  const list = el<HTMLUListElement>("history-list");
  list.innerHTML = "";
  history.forEach((entry, i) => {
    const li = document.createElement("li");
    li.textContent = `${entry.label} — ${entry.payload.points_raw.length} points`;
    li.addEventListener("click", () =>
      renderDesignCard(el("design-card"), entry.payload, entry.rawText, entry.verify),
    );
    list.appendChild(li);
  });
  const selA = el<HTMLSelectElement>("compare-a");
  const selB = el<HTMLSelectElement>("compare-b");
  for (const sel of [selA, selB]) {
    sel.innerHTML = history
      .map((h, i) => `<option value="${i}">${h.label}</option>`)
      .join("");
  }
  el<HTMLButtonElement>("compare-btn").disabled = history.length < 2;
}

async function onRequestDesign(): Promise<void> {
  const status = el<HTMLParagraphElement>("status");
  const validation = validateScenario(scenario);
  const errBox = el<HTMLUListElement>("validation-errors");
  errBox.innerHTML = "";
  if (!validation.ok) {
    for (const msg of validation.errors) {
      const li = document.createElement("li");
      li.textContent = msg;
      errBox.appendChild(li);
    }
    return; // invalid input never reaches the service
  }
  const seq = designSeq.next();
  status.textContent = "requesting design…";
  try {
    const { payload, rawText } = await api.requestDesign(validation.request);
    if (!designSeq.isCurrent(seq)) return; // stale response
    const verify = await api.verify({
      model: validation.request.model,
      criterion: validation.request.criterion,
      lambda: validation.request.lambda,
      nominals: validation.request.nominals,
      fixed_arms: validation.request.fixed_arms,
      design: payload,
      grid_points: 601,
    });
    if (!designSeq.isCurrent(seq)) return;
    const entry: HistoryEntry = {
      label: `#${history.length + 1} ${validation.request.criterion}` +
        ` (λ=${validation.request.lambda})`,
      scenario: structuredClone(scenario),
      request: validation.request,
      payload,
      rawText,
      verify,
    };
    history.push(entry);
    renderDesignCard(el("design-card"), payload, rawText, verify);
    renderHistory();
    status.textContent = "";
  } catch (err) {
    if (designSeq.isCurrent(seq)) {
      status.textContent = String(err);
      const retry = document.createElement("button");
      retry.textContent = "retry";
      retry.addEventListener("click", () => void onRequestDesign());
      status.appendChild(retry);
    }
  }
}

async function onCompare(): Promise<void> {
  const a = history[Number(el<HTMLSelectElement>("compare-a").value)];
  const b = history[Number(el<HTMLSelectElement>("compare-b").value)];
  const out = el<HTMLDivElement>("compare-table");
  if (!a || !b) return;
  const seq = compareSeq.next();
  out.textContent = "comparing…";
  try {
    const table = await compareScenarios(api, a, b);
    if (!compareSeq.isCurrent(seq)) return;
    const header =
      `<tr><th>nominals from</th>` +
      table.designs.map((d) => `<th colspan="2">${d}</th>`).join("") +
      `</tr><tr><th></th>` +
      table.designs.map(() => `<th>D-eff</th><th>c-eff</th>`).join("") +
      `</tr>`;
    const body = table.rows
      .map(
        (r) =>
          `<tr><td>${r.context}</td>` +
          r.dEff.map((d, i) => `<td>${d.toFixed(3)}</td><td>${r.cEff[i].toFixed(3)}</td>`).join("") +
          `</tr>`,
      )
      .join("");
    out.innerHTML = `<table class="compare">${header}${body}</table>`;
  } catch (err) {
    if (compareSeq.isCurrent(seq)) out.textContent = String(err);
  }
}

export function boot(): void {
  const modelSel = el<HTMLSelectElement>("model");
  modelSel.innerHTML = MODELS.map((m) => `<option>${m}</option>`).join("");
  modelSel.addEventListener("change", () => (scenario.model = modelSel.value));
  const critSel = el<HTMLSelectElement>("criterion");
  critSel.innerHTML = CRITERIA.map((c) => `<option>${c}</option>`).join("");
  critSel.addEventListener(
    "change",
    () => (scenario.criterion = critSel.value as ScenarioState["criterion"]),
  );
  const lambda = el<HTMLInputElement>("lambda");
  const lambdaOut = el<HTMLSpanElement>("lambda-value");
  lambda.addEventListener("input", () => {
    scenario.lambda = Number(lambda.value);
    lambdaOut.textContent = lambda.value;
  });
  el<HTMLButtonElement>("add-nominal").addEventListener("click", () => {
    const width = scenario.nominals[0]?.length ?? 3;
    scenario.nominals.push(new Array(width).fill("0"));
    renderNominalGrid();
  });
  el<HTMLButtonElement>("add-arm").addEventListener("click", () => {
    scenario.fixedArms.push({ doseRaw: "0", weight: "0.225" });
    renderArms();
  });
  el<HTMLButtonElement>("request-design").addEventListener("click", () =>
    void onRequestDesign(),
  );
  el<HTMLButtonElement>("compare-btn").addEventListener("click", () =>
    void onCompare(),
  );
  const csv = el<HTMLInputElement>("csv-file");
  csv.addEventListener("change", async () => {
    const file = csv.files?.[0];
    if (!file) return;
    const fitOut = el<HTMLPreElement>("fit-result");
    try {
      const result = await api.fitCsv(await file.text(), scenario.model);
      fitOut.textContent = JSON.stringify(result, null, 2);
    } catch (err) {
      fitOut.textContent = String(err);
    }
  });
  renderNominalGrid();
  renderArms();
  renderHistory();
  void api.health().then((ok) => {
    el<HTMLSpanElement>("service-state").textContent = ok
      ? "service reachable"
      : "service unreachable";
  });
}

if (typeof document !== "undefined" && document.getElementById("app-root")) {
  boot();
}
