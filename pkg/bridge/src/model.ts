/**
 * The deterministic test model: log-probability rows read verbatim from a
 * JSON spec and selected by integer hashing of the prefix. No floating
 * arithmetic happens here beyond the load-time normalization check, so any
 * runtime that parses the same spec serves bit-identical vectors.
 */

import { readFileSync } from "node:fs";

export interface TableModelSpec {
  format: "genloop-table-model";
  version: 1;
  tokens: string[];
  multiplier: number;
  tables: number[][];
}

export class ModelError extends Error {}

export class TableModel {
  readonly tokens: string[];
  readonly multiplier: number;
  readonly tables: number[][];

  constructor(spec: TableModelSpec) {
    if (spec.format !== "genloop-table-model" || spec.version !== 1) {
      throw new ModelError("not a v1 table-model spec");
    }
    for (const sentinel of ["<bos>", "<eos>", "<unk>"]) {
      if (!spec.tokens.includes(sentinel)) {
        throw new ModelError(`vocabulary is missing sentinel ${sentinel}`);
      }
    }
    for (const row of spec.tables) {
      if (row.length !== spec.tokens.length) {
        throw new ModelError("table row length must equal vocabulary size");
      }
      const total = row.reduce((acc, lp) => acc + Math.exp(lp), 0);
      if (Math.abs(total - 1.0) > 1e-6) {
        throw new ModelError(`table row exp-sums to ${total}, not 1`);
      }
    }
    this.tokens = spec.tokens;
    this.multiplier = spec.multiplier;
    this.tables = spec.tables;
  }

  static load(path: string): TableModel {
    return new TableModel(JSON.parse(readFileSync(path, "utf-8")) as TableModelSpec);
  }

  bucket(prefix: number[]): number {
    let h = 0;
    const n = this.tables.length;
    for (const t of prefix) {
      h = (h * this.multiplier + t + 1) % n;
    }
    return h;
  }

  logprobs(prefix: number[]): number[] {
    for (const t of prefix) {
      if (!Number.isInteger(t) || t < 0 || t >= this.tokens.length) {
        throw new ModelError(`invalid token id ${t}`);
      }
    }
    const row = this.tables[this.bucket(prefix)];
    if (row === undefined) {
      throw new ModelError("bucket out of range");
    }
    return row;
  }
}
