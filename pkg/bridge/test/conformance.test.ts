/**
 * End-to-end conformance: the pipeline's own `bridge-check` subcommand
 * drives this server's deterministic test model and must reproduce its
 * in-process decoding byte for byte.
 */

import assert from "node:assert/strict";
import { test } from "node:test";
import { spawnSync } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

const here = dirname(fileURLToPath(import.meta.url));
const ROOT = join(here, "..", "..", "..");
const MAIN = join(here, "..", "src", "main.js");
const FIXTURE = join(ROOT, "bridge", "fixtures", "testmodel.json");

interface CheckReport {
  ok: boolean;
  checks: { name: string; ok: boolean; detail: string }[];
  first_divergence: string | null;
  latency_ms: { calls: number } | null;
}

function runBridgeCheck(extra: string[] = []): { status: number | null; report: CheckReport } {
  const result = spawnSync(
    "python3",
    [
      "-m", "genloop.cli", "bridge-check",
      "--cmd", `${process.execPath} ${MAIN}`,
      "--model-spec", FIXTURE,
      "--latency-probes", "100",
      "--beam", "5", "--returns", "3", "--max-len", "4", "--min-len", "1",
      ...extra,
    ],
    { cwd: ROOT, encoding: "utf-8", timeout: 120_000 },
  );
  assert.equal(result.error, undefined, String(result.error));
  const stdout = result.stdout.trim();
  assert.ok(stdout, `no stdout; stderr: ${result.stderr}`);
  return { status: result.status, report: JSON.parse(stdout) as CheckReport };
}

test("bridge-check reproduces in-process decoding byte-identically", () => {
  const { status, report } = runBridgeCheck();
  assert.equal(status, 0, JSON.stringify(report, null, 2));
  assert.equal(report.ok, true);
  assert.equal(report.first_divergence, null);
  for (const check of report.checks) {
    assert.ok(check.ok, `${check.name}: ${check.detail}`);
  }
  const names = report.checks.map((c) => c.name);
  assert.ok(names.includes("vocab-matches-spec"));
  assert.ok(names.includes("malformed-line-error-response"));
  assert.ok(names.includes("session-survives-malformed-line"));
  assert.equal(report.latency_ms?.calls, 100);
});
