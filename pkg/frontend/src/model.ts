/**
 * Model interfaces behind the exporter and the oracle server.
 *
 * A vision-language model maps images and token sequences into one
 * embedding space; a language model exposes next-token logits. The
 * built-in "stub-v1" implements both deterministically with no downloads:
 * its images are small text files, embedded through the same text tower
 * plus a content-derived perturbation, so exports are self-consistent and
 * reproducible. Real models plug in behind the same interfaces.
 */

import { fnv1a64 } from "./formats.js";

export interface VisionLanguageModel {
  readonly id: string;
  readonly dim: number;
  readonly vocabSize: number;
  vocabulary(): string[];
  tokenize(text: string): number[];
  embedText(tokenIds: number[]): number[];
  embedImage(content: Buffer): number[];
}

export interface LanguageModelOracle {
  readonly id: string;
  readonly vocabSize: number;
  tokenize(text: string): number[];
  nextLogits(context: number[]): number[];
}

function hashUnit(seed: string): number {
  // Deterministic value in [0, 1) from a string key.
  const h = fnv1a64(Buffer.from(seed, "utf-8"));
  return Number(h % 1_000_000n) / 1_000_000;
}

function normalize(vec: number[]): number[] {
  const norm = Math.sqrt(vec.reduce((acc, x) => acc + x * x, 0));
  if (norm === 0) throw new Error("cannot normalize a zero vector");
  return vec.map((x) => x / norm);
}

export class StubModel implements VisionLanguageModel, LanguageModelOracle {
  readonly id = "stub-v1";
  readonly dim: number;
  readonly vocabSize: number;
  private readonly tokens: string[];

  constructor(dim = 16, vocabSize = 64) {
    this.dim = dim;
    this.vocabSize = vocabSize;
    const width = String(vocabSize - 1).length;
    this.tokens = Array.from({ length: vocabSize }, (_, i) =>
      `tok${String(i).padStart(Math.max(width, 2), "0")}`,
    );
  }

  vocabulary(): string[] {
    return [...this.tokens];
  }

  tokenize(text: string): number[] {
    // Hash-bucket tokenizer: any word maps to a stable id. Real models
    // substitute their own subword tokenizer here.
    return text
      .split(/\s+/)
      .filter((piece) => piece.length > 0)
      .map((piece) => Number(fnv1a64(Buffer.from(piece, "utf-8")) % BigInt(this.vocabSize)));
  }

  private tokenVector(tokenId: number): number[] {
    const vec: number[] = [];
    for (let j = 0; j < this.dim; j++) {
      vec.push(2 * hashUnit(`tok:${tokenId}:${j}`) - 1);
    }
    return vec;
  }

  embedText(tokenIds: number[]): number[] {
    if (tokenIds.length === 0) throw new Error("cannot embed an empty token sequence");
    const acc = new Array(this.dim).fill(0);
    for (const t of tokenIds) {
      if (t < 0 || t >= this.vocabSize) throw new Error(`token id ${t} out of range`);
      const vec = this.tokenVector(t);
      for (let j = 0; j < this.dim; j++) acc[j] += vec[j];
    }
    return normalize(acc.map((x) => x / tokenIds.length));
  }

  embedImage(content: Buffer): number[] {
    const text = content.toString("utf-8");
    const ids = this.tokenize(text);
    const contentKey = fnv1a64(content).toString(16);
    const noise: number[] = [];
    for (let j = 0; j < this.dim; j++) {
      noise.push(2 * hashUnit(`img:${contentKey}:${j}`) - 1);
    }
    if (ids.length === 0) return normalize(noise);
    const base = this.embedText(ids);
    return normalize(base.map((x, j) => x + 0.05 * noise[j]));
  }

  nextLogits(context: number[]): number[] {
    const key = context.join(",");
    const logits: number[] = [];
    for (let v = 0; v < this.vocabSize; v++) {
      logits.push(4 * hashUnit(`lm:${key}|${v}`) - 2);
    }
    return logits;
  }
}

export function loadModel(modelId: string): StubModel {
  if (modelId === "stub-v1") return new StubModel();
  throw new Error(
    `model ${modelId} is not available in this environment; only the ` +
      `deterministic "stub-v1" ships with the bridge`,
  );
}

export function logSoftmax(logits: number[], temperature = 1.0): number[] {
  const scaled = temperature === 1.0 ? logits : logits.map((x) => x / temperature);
  const max = Math.max(...scaled);
  const lse = max + Math.log(scaled.reduce((acc, x) => acc + Math.exp(x - max), 0));
  return scaled.map((x) => x - lse);
}
