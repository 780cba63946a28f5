/**
 * JSON-lines log-probability oracle.
 *
 * One JSON document per line on stdin/stdout. Requests: {"id", "method":
 * "next"|"score"|"logits", "context_tokens" or "context_text", "tokens"
 * (for score), "top_n" (optional)}. Responses echo the id and carry either
 * {"tokens", "logprobs"}, {"logprob"} for score, or {"error"}. Unknown
 * fields are ignored; malformed lines get an error response, never a
 * crash.
 */

import readline from "node:readline";
import { Readable, Writable } from "node:stream";

import { LanguageModelOracle, logSoftmax } from "./model.js";

interface OracleRequest {
  id?: unknown;
  method?: unknown;
  context_tokens?: unknown;
  context_text?: unknown;
  tokens?: unknown;
  top_n?: unknown;
}

export interface OracleOptions {
  temperature?: number;
}

function asTokenArray(value: unknown, vocabSize: number, field: string): number[] {
  if (value === undefined || value === null) return [];
  if (!Array.isArray(value)) throw new Error(`${field} must be an array of integers`);
  return value.map((t) => {
    const id = Number(t);
    if (!Number.isInteger(id) || id < 0 || id >= vocabSize) {
      throw new Error(`${field} holds an invalid token id: ${String(t)}`);
    }
    return id;
  });
}

export class OracleServer {
  private readonly temperature: number;

  constructor(
    private readonly model: LanguageModelOracle,
    options: OracleOptions = {},
  ) {
    this.temperature = options.temperature ?? 1.0;
  }

  private context(req: OracleRequest): number[] {
    if (req.context_tokens !== undefined && req.context_tokens !== null) {
      return asTokenArray(req.context_tokens, this.model.vocabSize, "context_tokens");
    }
    if (typeof req.context_text === "string") {
      return this.model.tokenize(req.context_text);
    }
    return [];
  }

  private nextLogprobs(context: number[]): number[] {
    const logprobs = logSoftmax(this.model.nextLogits(context), this.temperature);
    // Runtime self-check: the distribution must actually normalize.
    const max = Math.max(...logprobs);
    const lse = max + Math.log(logprobs.reduce((acc, x) => acc + Math.exp(x - max), 0));
    if (Math.abs(lse) > 1e-6) {
      throw new Error(`oracle normalization failed: logsumexp=${lse}`);
    }
    return logprobs;
  }

  private vectorResponse(id: number, values: number[], topN?: number) {
    let tokens = values.map((_, i) => i);
    if (topN !== undefined && topN < tokens.length) {
      tokens = tokens
        .slice()
        .sort((a, b) => values[b] - values[a] || a - b)
        .slice(0, topN)
        .sort((a, b) => a - b);
    }
    return { id, tokens, logprobs: tokens.map((t) => values[t]) };
  }

  handle(line: string): object {
    let req: OracleRequest;
    try {
      req = JSON.parse(line);
      if (typeof req !== "object" || req === null) throw new Error("not an object");
    } catch {
      return { id: -1, error: "malformed request line" };
    }
    const id = Number.isInteger(req.id) ? (req.id as number) : -1;
    try {
      const topN =
        req.top_n === undefined || req.top_n === null ? undefined : Number(req.top_n);
      switch (req.method) {
        case "next":
          return this.vectorResponse(id, this.nextLogprobs(this.context(req)), topN);
        case "logits":
          return this.vectorResponse(id, this.model.nextLogits(this.context(req)), topN);
        case "score": {
          const tokens = asTokenArray(req.tokens, this.model.vocabSize, "tokens");
          if (tokens.length === 0) throw new Error("score requires a non-empty tokens array");
          const context = this.context(req);
          let total = 0;
          const running = [...context];
          for (const t of tokens) {
            total += this.nextLogprobs(running)[t];
            running.push(t);
          }
          return { id, logprob: total };
        }
        default:
          return { id, error: `unknown method ${JSON.stringify(req.method ?? null)}` };
      }
    } catch (err) {
      return { id, error: err instanceof Error ? err.message : String(err) };
    }
  }

  /** Serve until the input stream closes. */
  async serve(input: Readable, output: Writable): Promise<void> {
    const rl = readline.createInterface({ input, crlfDelay: Infinity });
    for await (const line of rl) {
      if (!line.trim()) continue;
      output.write(JSON.stringify(this.handle(line)) + "\n");
    }
  }
}
