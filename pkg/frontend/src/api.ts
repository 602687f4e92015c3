/**
 * Typed client for the dosedesign HTTP service.
 *
 * Responses keep the raw body text alongside the parsed object: design
 * cards must display values exactly as the service serialized them, so
 * the UI extracts literal substrings from `rawText` instead of
 * re-stringifying parsed floats.
 */

export interface FixedArmPayload {
  dose_raw: number;
  dose_transformed: number;
  weight: number;
}

export interface DesignPayload {
  points_raw: number[];
  points_transformed: number[];
  weights: number[];
  fixed_arms: FixedArmPayload[];
  criterion?: string;
  value?: number;
  verdict?: string;
  max_sensitivity?: number;
}

export interface VerifyPayload {
  grid_transformed: number[];
  values: (number | null)[];
  max_value: number;
  argmax: number;
  verdict: string;
}

export interface DesignRequest {
  model: string;
  criterion: string;
  lambda: number;
  nominals: number[][];
  fixed_arms: number[][];
  include_verdict: boolean;
  pso: { n_particles: number; iters: number; seed: number; n_support?: number };
}

export interface ServiceError {
  status: number;
  code: string;
  detail: string;
}

export class ApiError extends Error {
  constructor(readonly info: ServiceError) {
    super(`${info.code}: ${info.detail}`);
  }
}

async function parseError(res: Response): Promise<never> {
  let code = "UNKNOWN";
  let detail = res.statusText;
  try {
    const body = await res.json();
    code = body?.error?.code ?? code;
    detail = body?.error?.detail ?? detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError({ status: res.status, code, detail: String(detail) });
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async post(path: string, body: unknown): Promise<Response> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await parseError(res);
    return res;
  }

  async health(): Promise<boolean> {
    try {
      const res = await this.fetchFn(`${this.baseUrl}/health`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async requestDesign(
    req: DesignRequest,
  ): Promise<{ payload: DesignPayload; rawText: string }> {
    const res = await this.post("/design", req);
    const rawText = await res.text();
    return { payload: JSON.parse(rawText) as DesignPayload, rawText };
  }

  async verify(
    req: Omit<DesignRequest, "include_verdict" | "pso"> & {
      design: DesignPayload;
      grid_points?: number;
    },
  ): Promise<VerifyPayload> {
    const res = await this.post("/verify", req);
    return (await res.json()) as VerifyPayload;
  }

  async efficiency(body: {
    model: string;
    kind: "D" | "c";
    theta: number[];
    design: DesignPayload;
    reference: DesignPayload;
  }): Promise<number> {
    const res = await this.post("/efficiency", body);
    const parsed = (await res.json()) as { efficiency: number };
    return parsed.efficiency;
  }

  async fitCsv(csvText: string, model: string): Promise<unknown> {
    const res = await this.fetchFn(
      `${this.baseUrl}/fit?model=${encodeURIComponent(model)}`,
      { method: "POST", headers: { "content-type": "text/csv" }, body: csvText },
    );
    if (!res.ok) await parseError(res);
    return res.json();
  }
}
