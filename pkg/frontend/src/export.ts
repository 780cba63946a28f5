/**
 * Export jobs: turn an image folder or a prompt list into the file formats
 * the core library loads (PBEM embeddings, PBLB labels, vocabulary, prompt
 * sets, cached text embeddings, world manifest).
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import {
  encodeLabels,
  encodeMatrix,
  encodeVocabulary,
  promptSetDoc,
} from "./formats.js";
import { VisionLanguageModel } from "./model.js";

export interface ExportJob {
  /** Folder with one subdirectory per class, each holding image files. */
  dataDir: string;
  modelId: string;
  outDir: string;
  /** Fraction of each class routed to the train split (rest to test). */
  trainFraction?: number;
  batchSize?: number;
}

export interface ExportResult {
  manifestPath: string;
  numTrain: number;
  numTest: number;
  classNames: string[];
}

async function listClassFolders(dataDir: string): Promise<Map<string, string[]>> {
  const classes = new Map<string, string[]>();
  const entries = await fs.readdir(dataDir, { withFileTypes: true });
  for (const entry of entries.sort((a, b) => a.name.localeCompare(b.name))) {
    if (!entry.isDirectory()) continue;
    const folder = path.join(dataDir, entry.name);
    const files = (await fs.readdir(folder))
      .sort()
      .map((name) => path.join(folder, name));
    if (files.length > 0) classes.set(entry.name, files);
  }
  if (classes.size === 0) {
    throw new Error(`no class subdirectories with files under ${dataDir}`);
  }
  return classes;
}

export async function exportEmbeddings(
  job: ExportJob,
  model: VisionLanguageModel,
): Promise<ExportResult> {
  const trainFraction = job.trainFraction ?? 1.0;
  const batchSize = job.batchSize ?? 100;
  const classes = await listClassFolders(job.dataDir);
  const classNames = [...classes.keys()];

  const train: { rows: number[][]; labels: number[] } = { rows: [], labels: [] };
  const test: { rows: number[][]; labels: number[] } = { rows: [], labels: [] };
  for (const [label, name] of classNames.entries()) {
    const files = classes.get(name)!;
    const cut = Math.ceil(trainFraction * files.length);
    for (let start = 0; start < files.length; start += batchSize) {
      const batch = files.slice(start, start + batchSize);
      const contents = await Promise.all(batch.map((f) => fs.readFile(f)));
      contents.forEach((content, i) => {
        const target = start + i < cut ? train : test;
        target.rows.push(model.embedImage(content));
        target.labels.push(label);
      });
    }
  }

  await fs.mkdir(job.outDir, { recursive: true });
  const vocabBytes = encodeVocabulary(model.vocabulary());
  const files: Record<string, string> = {
    train_embeddings: "train_embeddings.pbem",
    train_labels: "train_labels.pblb",
    vocab: "vocab.txt",
  };
  await fs.writeFile(path.join(job.outDir, files.train_embeddings), encodeMatrix(train.rows));
  await fs.writeFile(path.join(job.outDir, files.train_labels), encodeLabels(train.labels));
  await fs.writeFile(path.join(job.outDir, files.vocab), vocabBytes);
  if (test.rows.length > 0) {
    files.test_embeddings = "test_embeddings.pbem";
    files.test_labels = "test_labels.pblb";
    await fs.writeFile(path.join(job.outDir, files.test_embeddings), encodeMatrix(test.rows));
    await fs.writeFile(path.join(job.outDir, files.test_labels), encodeLabels(test.labels));
  }
  await fs.writeFile(
    path.join(job.outDir, "classes.txt"),
    classNames.join("\n") + "\n",
    "utf-8",
  );

  const manifest = {
    kind: "exported",
    model_id: model.id,
    dim: model.dim,
    num_classes: classNames.length,
    class_names: classNames,
    counts: { train: train.rows.length, test: test.rows.length },
    encoder: { type: "cached", embeddings: "text_embeddings.pbem", index: "text_index.txt" },
    files,
  };
  const manifestPath = path.join(job.outDir, "world.json");
  await fs.writeFile(manifestPath, JSON.stringify(manifest, null, 2) + "\n", "utf-8");
  return {
    manifestPath,
    numTrain: train.rows.length,
    numTest: test.rows.length,
    classNames,
  };
}

export interface TextCacheResult {
  matrixPath: string;
  indexPath: string;
  promptSetPath: string;
  entries: number;
}

/**
 * Export one cached text embedding per distinct prompt string, plus a
 * prompt-set JSON holding the token ids in input order. Duplicate prompt
 * strings share one cache entry.
 */
export async function exportTextCache(
  prompts: string[],
  model: VisionLanguageModel,
  outDir: string,
): Promise<TextCacheResult> {
  if (prompts.length === 0) throw new Error("no prompts to export");
  await fs.mkdir(outDir, { recursive: true });
  const keyOf = (ids: number[]) => ids.join(",");
  const seen = new Map<string, number[]>();
  const classPrompts: number[][] = [];
  for (const prompt of prompts) {
    const ids = model.tokenize(prompt);
    if (ids.length === 0) {
      throw new Error(`prompt tokenizes to nothing: ${JSON.stringify(prompt)}`);
    }
    classPrompts.push(ids);
    seen.set(keyOf(ids), ids);
  }
  const uniqueKeys = [...seen.keys()];
  const rows = uniqueKeys.map((key) => model.embedText(seen.get(key)!));

  const matrixPath = path.join(outDir, "text_embeddings.pbem");
  const indexPath = path.join(outDir, "text_index.txt");
  const promptSetPath = path.join(outDir, "prompts.json");
  await fs.writeFile(matrixPath, encodeMatrix(rows));
  await fs.writeFile(indexPath, uniqueKeys.join("\n") + "\n", "utf-8");
  const vocabBytes = encodeVocabulary(model.vocabulary());
  await fs.writeFile(
    promptSetPath,
    JSON.stringify(promptSetDoc(classPrompts, vocabBytes), null, 2) + "\n",
    "utf-8",
  );
  return { matrixPath, indexPath, promptSetPath, entries: rows.length };
}
