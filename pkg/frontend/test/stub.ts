// Minimal stand-in for the scoring service: a real HTTP listener that
// parses the multipart upload, records what arrived, and answers with
// canned probabilities. Tests inspect `seen` to check what actually
// crossed the wire.

import http from "node:http";
import type { AddressInfo } from "node:net";

export interface SeenPart {
  name: string;
  filename: string;
  type: string;
  bytes: number;
  payload: Uint8Array;
}

export interface SeenRequest {
  url: string;
  parts: SeenPart[];
  context: Record<string, unknown> | null;
}

export interface StubReply {
  status?: number;
  body: unknown;
}

export type ReplyFn = (seen: SeenRequest) => StubReply | Promise<StubReply>;

export interface Stub {
  base: string;
  seen: SeenRequest[];
  close(): Promise<void>;
}

export const STUB_VERSIONS = { cough: "stub-cough-1", context: "stub-ctx-1" };

/**
 * Mirrors the service's passthrough and averaging rules with fixed
 * per-model probabilities, so a page that renders anything other than
 * the wire values is caught.
 */
export function defaultReply(seen: SeenRequest): StubReply {
  const pCough = seen.parts.length > 0 ? 0.6 : null;
  const pContext = seen.context !== null ? 0.8 : null;
  if (pCough === null && pContext === null) {
    return { status: 400, body: { detail: "nothing to score" } };
  }
  const pEnsemble =
    pCough === null ? pContext : pContext === null ? pCough : (pCough + pContext) / 2;
  const flag = pCough === null ? "context-only" : pContext === null ? "cough-only" : null;
  const symptomatic =
    seen.context === null
      ? null
      : ["has_cough", "has_fever", "has_sob"].some((k) => seen.context![k] === "yes");
  return {
    body: {
      p_cough: pCough,
      p_context: pContext,
      p_ensemble: pEnsemble,
      flag,
      symptomatic,
      model_versions: STUB_VERSIONS,
      timing_ms: 1,
    },
  };
}

function sendJson(res: http.ServerResponse, status: number, body: unknown): void {
  res.writeHead(status, { "content-type": "application/json" });
  res.end(JSON.stringify(body));
}

export async function startStub(reply: ReplyFn = defaultReply): Promise<Stub> {
  const seen: SeenRequest[] = [];

  async function handle(req: http.IncomingMessage, res: http.ServerResponse): Promise<void> {
    if (req.method === "GET" && req.url === "/v1/health") {
      sendJson(res, 200, { status: "ok", model_versions: STUB_VERSIONS });
      return;
    }
    const chunks: Buffer[] = [];
    for await (const c of req) chunks.push(c as Buffer);
    if (req.method !== "POST" || req.url !== "/v1/score") {
      sendJson(res, 404, { detail: "no such route" });
      return;
    }
    const entry: SeenRequest = { url: req.url, parts: [], context: null };
    try {
      // Let the fetch-spec parser deal with the multipart framing.
      const form = await new Response(Buffer.concat(chunks), {
        headers: { "content-type": String(req.headers["content-type"] ?? "") },
      }).formData();
      for (const [name, value] of form.entries()) {
        if (typeof value === "string") {
          if (name === "context") {
            entry.context = JSON.parse(value) as Record<string, unknown>;
          }
          continue;
        }
        const payload = new Uint8Array(await value.arrayBuffer());
        entry.parts.push({
          name,
          filename: value.name,
          type: value.type,
          bytes: payload.byteLength,
          payload,
        });
      }
    } catch (err) {
      sendJson(res, 400, { detail: `bad upload: ${String(err)}` });
      return;
    }
    seen.push(entry);
    const r = await reply(entry);
    sendJson(res, r.status ?? 200, r.body);
  }

  const server = http.createServer((req, res) => {
    handle(req, res).catch((err) => sendJson(res, 500, { detail: String(err) }));
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const port = (server.address() as AddressInfo).port;
  return {
    base: `http://127.0.0.1:${port}`,
    seen,
    close: () => new Promise((resolve) => server.close(() => resolve())),
  };
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
