/**
 * Wire protocol v1: one JSON object per line, strict request/response.
 *
 * Request:  {"v": 1, "id": <int, strictly increasing>, "op": <op>, "payload": {...}}
 * Response: {"v": 1, "id": <echo | null>, "status": "ok" | "error", "payload": {...}}
 *
 * Ops and payloads:
 *   vocab     {}                                -> {tokens: string[], capabilities: {finetune: bool}}
 *   logprobs  {prefix: number[]}                -> {logprobs: number[]}   (length = |vocab|, exp-sum = 1 +/- 1e-6)
 *   finetune  {texts: string[], weight: number} -> {}                     (only if advertised)
 *   shutdown  {}                                -> {}                     (session then ends)
 *
 * A malformed line is answered with an error response carrying id null;
 * the session stays alive. See PROTOCOL.md for worked examples.
 */

export const PROTOCOL_VERSION = 1;

export const OPS = ["vocab", "logprobs", "finetune", "shutdown"] as const;
export type Op = (typeof OPS)[number];

export interface ScorerRequest {
  id: number;
  op: Op;
  payload: Record<string, unknown>;
}

export interface ScorerResponse {
  id: number | null;
  status: "ok" | "error";
  payload: Record<string, unknown>;
}

export class ProtocolError extends Error {}

export function parseRequest(line: string): ScorerRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    throw new ProtocolError("not valid JSON");
  }
  if (typeof obj !== "object" || obj === null) {
    throw new ProtocolError("request must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  if (rec.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(rec.v)}`);
  }
  if (typeof rec.id !== "number" || !Number.isInteger(rec.id)) {
    throw new ProtocolError("request id must be an integer");
  }
  if (!OPS.includes(rec.op as Op)) {
    throw new ProtocolError(`unknown op ${String(rec.op)}`);
  }
  const payload = rec.payload ?? {};
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new ProtocolError("payload must be an object");
  }
  return { id: rec.id, op: rec.op as Op, payload: payload as Record<string, unknown> };
}

export function encodeRequest(req: ScorerRequest): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, id: req.id, op: req.op, payload: req.payload });
}

export function encodeResponse(resp: ScorerResponse): string {
  return JSON.stringify({
    v: PROTOCOL_VERSION,
    id: resp.id,
    status: resp.status,
    payload: resp.payload,
  });
}

export function parseResponse(line: string): ScorerResponse {
  const obj = JSON.parse(line) as Record<string, unknown>;
  if (obj.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(obj.v)}`);
  }
  if (obj.status !== "ok" && obj.status !== "error") {
    throw new ProtocolError(`bad status ${String(obj.status)}`);
  }
  const id = obj.id;
  if (id !== null && (typeof id !== "number" || !Number.isInteger(id))) {
    throw new ProtocolError("response id must be an integer or null");
  }
  return {
    id: id as number | null,
    status: obj.status,
    payload: (obj.payload ?? {}) as Record<string, unknown>,
  };
}

export function okResponse(id: number, payload: Record<string, unknown>): string {
  return encodeResponse({ id, status: "ok", payload });
}

export function errorResponse(id: number | null, message: string): string {
  return encodeResponse({ id, status: "error", payload: { message } });
}
