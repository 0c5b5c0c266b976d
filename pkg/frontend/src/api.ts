// HTTP client for the scoring service. The page never computes a
// probability itself; everything shown to the user comes out of a
// parsed ScoreResponse.

export interface ScoreResponse {
  p_cough: number | null;
  p_context: number | null;
  p_ensemble: number;
  flag: "cough-only" | "context-only" | null;
  symptomatic: boolean | null;
  model_versions: Record<string, string>;
  timing_ms?: number;
}

export interface HealthResponse {
  status: string;
  model_versions: Record<string, string>;
}

export interface NamedBlob {
  blob: Blob;
  name: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

function isProbability(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x) && x >= 0 && x <= 1;
}

export function parseScoreResponse(x: unknown): ScoreResponse {
  if (typeof x !== "object" || x === null) {
    throw new Error("unexpected score response: not an object");
  }
  const o = x as Record<string, unknown>;
  for (const key of ["p_cough", "p_context"]) {
    if (o[key] !== null && !isProbability(o[key])) {
      throw new Error(`unexpected score response: bad ${key}`);
    }
  }
  if (!isProbability(o.p_ensemble)) {
    throw new Error("unexpected score response: bad p_ensemble");
  }
  if (o.flag !== null && o.flag !== "cough-only" && o.flag !== "context-only") {
    throw new Error("unexpected score response: bad flag");
  }
  if (o.symptomatic !== null && typeof o.symptomatic !== "boolean") {
    throw new Error("unexpected score response: bad symptomatic");
  }
  const versions: Record<string, string> = {};
  if (o.model_versions !== undefined) {
    if (typeof o.model_versions !== "object" || o.model_versions === null) {
      throw new Error("unexpected score response: bad model_versions");
    }
    for (const [k, v] of Object.entries(o.model_versions)) {
      if (typeof v !== "string") {
        throw new Error("unexpected score response: bad model_versions");
      }
      versions[k] = v;
    }
  }
  const out: ScoreResponse = {
    p_cough: o.p_cough as number | null,
    p_context: o.p_context as number | null,
    p_ensemble: o.p_ensemble,
    flag: o.flag as ScoreResponse["flag"],
    symptomatic: o.symptomatic as boolean | null,
    model_versions: versions,
  };
  if (typeof o.timing_ms === "number") out.timing_ms = o.timing_ms;
  return out;
}

async function readDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as Record<string, unknown>;
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body, fall through
  }
  return `request failed (${res.status})`;
}

/**
 * POST the recordings and questionnaire to /v1/score. Recordings go as
 * repeated "audio" parts, the questionnaire (if any) as one "context"
 * part holding a JSON object. Throws ApiError for 4xx/5xx replies and
 * lets network failures propagate as-is.
 */
export async function postScore(
  baseUrl: string,
  recordings: NamedBlob[],
  context: Record<string, number | string> | null,
  fetchImpl: FetchLike = defaultFetch,
): Promise<ScoreResponse> {
  const form = new FormData();
  for (const r of recordings) form.append("audio", r.blob, r.name);
  if (context !== null) form.append("context", JSON.stringify(context));
  const res = await fetchImpl(`${baseUrl}/v1/score`, { method: "POST", body: form });
  if (!res.ok) throw new ApiError(res.status, await readDetail(res));
  return parseScoreResponse(await res.json());
}

export async function getHealth(
  baseUrl: string,
  fetchImpl: FetchLike = defaultFetch,
): Promise<HealthResponse> {
  const res = await fetchImpl(`${baseUrl}/v1/health`, { method: "GET" });
  if (!res.ok) throw new ApiError(res.status, await readDetail(res));
  const body = (await res.json()) as Record<string, unknown>;
  if (typeof body.status !== "string") {
    throw new Error("unexpected health response");
  }
  return {
    status: body.status,
    model_versions: (body.model_versions as Record<string, string>) ?? {},
  };
}
