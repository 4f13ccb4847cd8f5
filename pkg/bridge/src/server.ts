/**
 * Session loop: read one request line, write one response line, in order.
 * Malformed input produces an error response (id null) and the session
 * continues; only a shutdown request or end of input terminates it.
 */

import { createInterface } from "node:readline";
import { createServer, type Server } from "node:net";
import type { Readable, Writable } from "node:stream";

import { ModelError, TableModel } from "./model.js";
import { errorResponse, okResponse, parseRequest, ProtocolError } from "./protocol.js";

export class Session {
  private lastId = 0;
  private done = false;

  constructor(private readonly model: TableModel) {}

  get finished(): boolean {
    return this.done;
  }

  /** One request line in, one response line out (without trailing newline). */
  handleLine(line: string): string {
    let req;
    try {
      req = parseRequest(line);
    } catch (err) {
      const message = err instanceof ProtocolError ? err.message : String(err);
      return errorResponse(null, message);
    }
    if (req.id <= this.lastId) {
      return errorResponse(req.id, `request ids must be strictly increasing (last was ${this.lastId})`);
    }
    this.lastId = req.id;
    try {
      switch (req.op) {
        case "vocab":
          return okResponse(req.id, {
            tokens: this.model.tokens,
            capabilities: { finetune: false },
          });
        case "logprobs": {
          const prefix = req.payload.prefix;
          if (!Array.isArray(prefix)) {
            return errorResponse(req.id, "logprobs payload needs a prefix array");
          }
          return okResponse(req.id, { logprobs: this.model.logprobs(prefix as number[]) });
        }
        case "finetune":
          return errorResponse(req.id, "finetune not supported by the table test model");
        case "shutdown":
          this.done = true;
          return okResponse(req.id, {});
      }
    } catch (err) {
      const message = err instanceof ModelError ? err.message : `internal error: ${String(err)}`;
      return errorResponse(req.id, message);
    }
  }
}

export function serveStream(model: TableModel, input: Readable, output: Writable,
                            onClose?: () => void): void {
  const session = new Session(model);
  const rl = createInterface({ input, crlfDelay: Infinity });
  rl.on("line", (line) => {
    if (!line.trim()) {
      return;
    }
    output.write(session.handleLine(line) + "\n");
    if (session.finished) {
      rl.close();
      onClose?.();
    }
  });
  rl.on("close", () => {
    onClose?.();
  });
}

/** Optional local TCP mode: each connection gets its own session. */
export function serveTcp(model: TableModel, port: number, host = "127.0.0.1"): Server {
  const server = createServer((socket) => {
    serveStream(model, socket, socket, () => socket.end());
  });
  server.listen(port, host);
  return server;
}
