/**
 * Entry point: serve a table-model spec over stdio (default) or TCP.
 *
 *   node dist/src/main.js <spec.json>             # stdio session
 *   node dist/src/main.js --tcp 4821 <spec.json>  # local TCP listener
 *
 * Extra positional arguments are ignored beyond the first spec path, so
 * callers that append the shared spec path can also pin one explicitly.
 */

import { TableModel } from "./model.js";
import { serveStream, serveTcp } from "./server.js";

function main(argv: string[]): void {
  let tcpPort: number | null = null;
  const positional: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--tcp") {
      const port = argv[++i];
      if (port === undefined) {
        process.stderr.write("--tcp needs a port\n");
        process.exit(2);
      }
      tcpPort = Number(port);
    } else if (arg !== undefined) {
      positional.push(arg);
    }
  }
  const specPath = positional[0];
  if (specPath === undefined) {
    process.stderr.write("usage: main.js [--tcp PORT] <model-spec.json>\n");
    process.exit(2);
  }

  let model: TableModel;
  try {
    model = TableModel.load(specPath);
  } catch (err) {
    process.stderr.write(`cannot load model spec ${specPath}: ${String(err)}\n`);
    process.exit(1);
  }

  if (tcpPort !== null) {
    const server = serveTcp(model, tcpPort);
    server.on("listening", () => {
      process.stderr.write(`listening on 127.0.0.1:${tcpPort}\n`);
    });
  } else {
    serveStream(model, process.stdin, process.stdout, () => process.exit(0));
  }
}

main(process.argv.slice(2));
