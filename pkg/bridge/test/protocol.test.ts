import assert from "node:assert/strict";
import { test } from "node:test";

import {
  encodeRequest,
  encodeResponse,
  errorResponse,
  okResponse,
  parseRequest,
  parseResponse,
  ProtocolError,
  type ScorerRequest,
  type ScorerResponse,
} from "../src/protocol.js";

test("request round-trip is identity for every op", () => {
  const requests: ScorerRequest[] = [
    { id: 1, op: "vocab", payload: {} },
    { id: 2, op: "logprobs", payload: { prefix: [3, 4, 5] } },
    { id: 3, op: "finetune", payload: { texts: ["sun rain"], weight: 2.0 } },
    { id: 4, op: "shutdown", payload: {} },
  ];
  for (const req of requests) {
    assert.deepEqual(parseRequest(encodeRequest(req)), req);
  }
});

test("response round-trip is identity", () => {
  const responses: ScorerResponse[] = [
    { id: 9, status: "ok", payload: { logprobs: [-0.5, -1.25] } },
    { id: null, status: "error", payload: { message: "nope" } },
  ];
  for (const resp of responses) {
    assert.deepEqual(parseResponse(encodeResponse(resp)), resp);
  }
});

test("ok and error helpers produce parseable lines", () => {
  assert.deepEqual(parseResponse(okResponse(5, { a: 1 })),
    { id: 5, status: "ok", payload: { a: 1 } });
  assert.deepEqual(parseResponse(errorResponse(null, "bad")),
    { id: null, status: "error", payload: { message: "bad" } });
});

test("malformed requests are rejected with ProtocolError", () => {
  const bad = [
    "not json at all",
    JSON.stringify({ v: 2, id: 1, op: "vocab", payload: {} }),
    JSON.stringify({ v: 1, id: "one", op: "vocab", payload: {} }),
    JSON.stringify({ v: 1, id: 1, op: "explode", payload: {} }),
    JSON.stringify({ v: 1, id: 1, op: "vocab", payload: [] }),
  ];
  for (const line of bad) {
    assert.throws(() => parseRequest(line), ProtocolError);
  }
});
