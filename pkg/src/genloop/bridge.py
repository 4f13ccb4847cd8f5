"""Client side of the external-scorer wire protocol.

Any third-party autoregressive model can serve the decoder by speaking
newline-delimited JSON over its stdin/stdout. One request, one response,
strictly in order:

    -> {"v": 1, "id": 1, "op": "vocab",    "payload": {}}
    <- {"v": 1, "id": 1, "status": "ok",   "payload": {"tokens": [...],
                                                        "capabilities": {"finetune": false}}}
    -> {"v": 1, "id": 2, "op": "logprobs", "payload": {"prefix": [5, 9]}}
    <- {"v": 1, "id": 2, "status": "ok",   "payload": {"logprobs": [...]}}
    -> {"v": 1, "id": 3, "op": "finetune", "payload": {"texts": ["..."], "weight": 1.0}}
    -> {"v": 1, "id": 4, "op": "shutdown", "payload": {}}

Request ids are strictly increasing per session. A server must answer a
malformed line with an error response (id null) and keep the session
alive. logprob payloads must cover the advertised vocabulary exactly and
exponentiate-sum to 1 within 1e-6.

The in-package pipeline never needs a bridge; this client exists so real
neural models can be plugged in, and ``bridge_check`` verifies that a
bridge's deterministic test model reproduces in-process decoding bit for
bit before anyone trusts it with a long run.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraints import CountLiteral, PhraseLiteral, ConstraintSet
from .decoder import DecodeJob, DecoderConfig, decode
from .errors import BridgeError, InputError
from .lm import TableModel, Vocabulary

PROTOCOL_VERSION = 1
OPS = ("vocab", "logprobs", "finetune", "shutdown")


@dataclass(frozen=True)
class ScorerRequest:
    id: int
    op: str
    payload: dict

    def encode(self) -> str:
        if self.op not in OPS:
            raise InputError(f"unknown op {self.op!r}")
        return json.dumps({"v": PROTOCOL_VERSION, "id": self.id, "op": self.op,
                           "payload": self.payload}, sort_keys=True)

    @classmethod
    def parse(cls, line: str) -> "ScorerRequest":
        obj = json.loads(line)
        if obj.get("v") != PROTOCOL_VERSION:
            raise InputError(f"unsupported protocol version {obj.get('v')!r}")
        if obj.get("op") not in OPS:
            raise InputError(f"unknown op {obj.get('op')!r}")
        return cls(int(obj["id"]), obj["op"], dict(obj.get("payload") or {}))


@dataclass(frozen=True)
class ScorerResponse:
    id: int | None
    status: str
    payload: dict

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def encode(self) -> str:
        return json.dumps({"v": PROTOCOL_VERSION, "id": self.id, "status": self.status,
                           "payload": self.payload}, sort_keys=True)

    @classmethod
    def parse(cls, line: str) -> "ScorerResponse":
        obj = json.loads(line)
        if obj.get("v") != PROTOCOL_VERSION:
            raise BridgeError(f"unsupported protocol version {obj.get('v')!r}")
        if obj.get("status") not in ("ok", "error"):
            raise BridgeError(f"bad status {obj.get('status')!r}")
        rid = obj.get("id")
        return cls(None if rid is None else int(rid), obj["status"],
                   dict(obj.get("payload") or {}))


class BridgeSession:
    """One child-process bridge session with timeout-guarded line reads."""

    def __init__(self, cmd: str | Sequence[str], timeout: float = 10.0):
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        try:
            self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE)
        except OSError as exc:
            raise BridgeError(f"cannot start bridge {argv!r}: {exc}") from None
        self.timeout = timeout
        self._buf = b""
        self._next_id = 1
        os.set_blocking(self._proc.stdout.fileno(), False)

    def send_raw(self, line: str) -> None:
        try:
            self._proc.stdin.write((line + "\n").encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeError(f"bridge stdin closed: {exc}") from None

    def read_response(self, timeout: float | None = None) -> ScorerResponse:
        line = self._read_line(timeout if timeout is not None else self.timeout)
        return ScorerResponse.parse(line)

    def _read_line(self, timeout: float) -> str:
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + timeout
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line, self._buf = self._buf[:nl], self._buf[nl + 1:]
                return line.decode("utf-8")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BridgeError(f"timed out after {timeout:.1f}s waiting for bridge response")
            ready, _, _ = select.select([fd], [], [], min(0.05, remaining))
            if ready:
                chunk = os.read(fd, 1 << 16)
                if not chunk:
                    raise BridgeError("bridge closed its stdout mid-session")
                self._buf += chunk

    def request(self, op: str, payload: dict | None = None,
                timeout: float | None = None) -> ScorerResponse:
        req = ScorerRequest(self._next_id, op, payload or {})
        self._next_id += 1
        self.send_raw(req.encode())
        resp = self.read_response(timeout)
        if resp.id != req.id:
            raise BridgeError(f"response id {resp.id!r} does not echo request id {req.id}")
        return resp

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self.send_raw(ScorerRequest(self._next_id, "shutdown", {}).encode())
            except BridgeError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdin:
            self._proc.stdin.close()
        if self._proc.stdout:
            self._proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BridgeScorer:
    """Adapts a bridge session to the in-process Scorer contract."""

    def __init__(self, session: BridgeSession):
        self._session = session
        resp = session.request("vocab")
        if not resp.ok:
            raise BridgeError(f"vocab request failed: {resp.payload.get('message')}")
        self.vocab = Vocabulary(resp.payload["tokens"])
        self.capabilities = dict(resp.payload.get("capabilities") or {})

    def next_token_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        resp = self._session.request("logprobs", {"prefix": [int(i) for i in prefix]})
        if not resp.ok:
            raise BridgeError(f"logprobs request failed: {resp.payload.get('message')}")
        vec = np.asarray(resp.payload["logprobs"], dtype=np.float64)
        if vec.shape != (len(self.vocab),):
            raise BridgeError(f"logprob vector has length {vec.shape}, vocab is {len(self.vocab)}")
        total = float(np.exp(vec).sum())
        if abs(total - 1.0) > 1e-6:
            raise BridgeError(f"logprob vector exp-sums to {total!r}, not 1")
        return vec

    def finetune(self, texts: Sequence[str], weight: float = 1.0) -> None:
        if not self.capabilities.get("finetune", False):
            raise BridgeError("bridge does not advertise the finetune capability")
        resp = self._session.request("finetune", {"texts": list(texts), "weight": weight})
        if not resp.ok:
            raise BridgeError(f"finetune request failed: {resp.payload.get('message')}")


@dataclass
class ConformanceReport:
    ok: bool
    checks: list[dict] = field(default_factory=list)
    first_divergence: str | None = None
    latency_ms: dict | None = None

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append({"name": name, "ok": ok, "detail": detail})
        if not ok:
            self.ok = False

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": self.checks,
                "first_divergence": self.first_divergence, "latency_ms": self.latency_ms}


def default_check_jobs(vocab: Vocabulary) -> list[DecodeJob]:
    """Deterministic fixture jobs over whatever vocabulary the model advertises."""
    words = [t for i, t in enumerate(vocab.tokens)
             if i not in (vocab.bos_id, vocab.eos_id, vocab.unk_id)]
    if len(words) < 3:
        raise InputError("test model vocabulary too small for fixture jobs")
    jobs = [DecodeJob("fixture:plain", words[0], ConstraintSet(()))]
    jobs.append(DecodeJob(
        "fixture:negative", words[1],
        ConstraintSet(((PhraseLiteral((words[2],), negated=True),),))))
    jobs.append(DecodeJob(
        "fixture:count", words[2],
        ConstraintSet(((CountLiteral(((words[0],), (words[1],)), "<=", 1),),))))
    return jobs


def bridge_check(cmd: str | Sequence[str], model_spec_path, cfg: DecoderConfig | None = None,
                 jobs: Sequence[DecodeJob] | None = None, timeout: float = 10.0,
                 latency_probes: int = 100) -> ConformanceReport:
    """Verify a bridge reproduces in-process decoding on the shared test model.

    The bridge is launched with the model spec path appended to its
    command line; the same spec file drives the in-process TableModel
    twin. Decoded generations must serialize byte-identically.
    """
    if cfg is None:
        cfg = DecoderConfig(beam_size=5, num_returns=3, max_len=4, min_len=1)
    twin = TableModel.load(model_spec_path)
    report = ConformanceReport(ok=True)
    argv = (shlex.split(cmd) if isinstance(cmd, str) else list(cmd)) + [str(model_spec_path)]
    with BridgeSession(argv, timeout=timeout) as session:
        scorer = BridgeScorer(session)
        report.add("vocab-matches-spec", scorer.vocab == twin.vocab,
                   f"bridge has {len(scorer.vocab)} tokens, spec has {len(twin.vocab)}")
        if not report.ok:
            return report

        if jobs is None:
            jobs = default_check_jobs(twin.vocab)
        for job in jobs:
            prompt = twin.vocab.encode(job.prompt)
            local = decode(twin, prompt, job.constraints, cfg, job=job.job, prompt_text=job.prompt)
            remote = decode(scorer, prompt, job.constraints, cfg, job=job.job, prompt_text=job.prompt)
            local_lines = [g.to_json() for g in local]
            remote_lines = [g.to_json() for g in remote]
            if local_lines == remote_lines:
                report.add(f"decode:{job.job}", True, f"{len(local_lines)} generations identical")
            else:
                rank = next((i for i, (a, b) in enumerate(zip(local_lines, remote_lines))
                             if a != b), min(len(local_lines), len(remote_lines)))
                divergence = (f"job {job.job} rank {rank}: local="
                              f"{local_lines[rank] if rank < len(local_lines) else '<missing>'} "
                              f"bridge={remote_lines[rank] if rank < len(remote_lines) else '<missing>'}")
                report.add(f"decode:{job.job}", False, divergence)
                if report.first_divergence is None:
                    report.first_divergence = divergence

        # A malformed line must produce an error response, not kill the session.
        session.send_raw("this is not json")
        try:
            resp = session.read_response()
            report.add("malformed-line-error-response",
                       resp.status == "error" and resp.id is None,
                       f"status={resp.status} id={resp.id}")
            alive = session.request("vocab").ok
            report.add("session-survives-malformed-line", alive)
        except BridgeError as exc:
            report.add("malformed-line-error-response", False, str(exc))

        if latency_probes > 0:
            prefix = [int(twin.vocab.encode(jobs[0].prompt)[0])]
            times = []
            for _ in range(latency_probes):
                t0 = time.perf_counter()
                scorer.next_token_logprobs(prefix)
                times.append((time.perf_counter() - t0) * 1e3)
            report.latency_ms = {"calls": latency_probes,
                                 "min": round(min(times), 3),
                                 "mean": round(sum(times) / len(times), 3),
                                 "max": round(max(times), 3)}
    return report
