/**
 * Binary and text file formats shared with the promptcert core library.
 *
 * PBEM matrix (little-endian): magic "PBEM", u32 version 1, u8 dtype 1
 * (float32), u8 ndim 2, 2 x u64 dims, then rows*cols float32 row-major.
 * PBLB labels: magic "PBLB", u32 version 1, u64 n, then n x u32 labels.
 * Vocabulary: UTF-8 text, one token per line. Prompt sets: JSON with
 * class_prompts, initial_prompt, and a vocab_hash (FNV-1a 64 over the
 * vocabulary file bytes, hex).
 */

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = (1n << 64n) - 1n;

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

export function fnv1a64Hex(data: Uint8Array): string {
  return fnv1a64(data).toString(16).padStart(16, "0");
}

const PBEM_HEADER_BYTES = 4 + 4 + 1 + 1 + 8 + 8;

export function encodeMatrix(rows: number[][]): Buffer {
  const nRows = rows.length;
  const nCols = nRows > 0 ? rows[0].length : 0;
  for (const row of rows) {
    if (row.length !== nCols) throw new Error("ragged matrix");
  }
  const buf = Buffer.alloc(PBEM_HEADER_BYTES + nRows * nCols * 4);
  buf.write("PBEM", 0, "ascii");
  buf.writeUInt32LE(1, 4); // version
  buf.writeUInt8(1, 8); // dtype float32
  buf.writeUInt8(2, 9); // ndim
  buf.writeBigUInt64LE(BigInt(nRows), 10);
  buf.writeBigUInt64LE(BigInt(nCols), 18);
  let offset = PBEM_HEADER_BYTES;
  for (const row of rows) {
    for (const value of row) {
      buf.writeFloatLE(value, offset);
      offset += 4;
    }
  }
  return buf;
}

export function decodeMatrix(buf: Buffer): number[][] {
  if (buf.length < PBEM_HEADER_BYTES || buf.toString("ascii", 0, 4) !== "PBEM") {
    throw new Error("not a PBEM file");
  }
  if (buf.readUInt32LE(4) !== 1) throw new Error("unsupported PBEM version");
  if (buf.readUInt8(8) !== 1) throw new Error("unsupported PBEM dtype");
  const nRows = Number(buf.readBigUInt64LE(10));
  const nCols = Number(buf.readBigUInt64LE(18));
  if (buf.length !== PBEM_HEADER_BYTES + nRows * nCols * 4) {
    throw new Error("PBEM payload length mismatch");
  }
  const rows: number[][] = [];
  let offset = PBEM_HEADER_BYTES;
  for (let i = 0; i < nRows; i++) {
    const row: number[] = [];
    for (let j = 0; j < nCols; j++) {
      row.push(buf.readFloatLE(offset));
      offset += 4;
    }
    rows.push(row);
  }
  return rows;
}

export function encodeLabels(labels: number[]): Buffer {
  const buf = Buffer.alloc(4 + 4 + 8 + labels.length * 4);
  buf.write("PBLB", 0, "ascii");
  buf.writeUInt32LE(1, 4);
  buf.writeBigUInt64LE(BigInt(labels.length), 8);
  labels.forEach((label, i) => buf.writeUInt32LE(label, 16 + 4 * i));
  return buf;
}

export function decodeLabels(buf: Buffer): number[] {
  if (buf.length < 16 || buf.toString("ascii", 0, 4) !== "PBLB") {
    throw new Error("not a PBLB file");
  }
  if (buf.readUInt32LE(4) !== 1) throw new Error("unsupported PBLB version");
  const n = Number(buf.readBigUInt64LE(8));
  if (buf.length !== 16 + 4 * n) throw new Error("PBLB payload length mismatch");
  const labels: number[] = [];
  for (let i = 0; i < n; i++) labels.push(buf.readUInt32LE(16 + 4 * i));
  return labels;
}

export function encodeVocabulary(tokens: string[]): Buffer {
  return Buffer.from(tokens.join("\n") + "\n", "utf-8");
}

export interface PromptSetDoc {
  class_prompts: number[][];
  initial_prompt: number[];
  vocab_hash: string;
}

export function promptSetDoc(
  classPrompts: number[][],
  vocabBytes: Uint8Array,
  initialPrompt: number[] = [],
): PromptSetDoc {
  return {
    class_prompts: classPrompts,
    initial_prompt: initialPrompt,
    vocab_hash: fnv1a64Hex(vocabBytes),
  };
}
