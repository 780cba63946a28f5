#!/usr/bin/env node
/**
 * promptcert-bridge CLI: export-embeddings, export-text, serve.
 */

import { promises as fs } from "node:fs";
import process from "node:process";

import { exportEmbeddings, exportTextCache } from "./export.js";
import { loadModel } from "./model.js";
import { OracleServer } from "./oracle.js";

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): { positional: string[]; flags: Flags } {
  const positional: string[] = [];
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const key = arg.slice(2);
      const value = argv[i + 1];
      if (value === undefined || value.startsWith("--")) {
        flags[key] = "true";
      } else {
        flags[key] = value;
        i++;
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

const USAGE = `usage:
  promptcert-bridge export-embeddings --data DIR --out DIR [--model stub-v1]
                                      [--train-fraction F] [--batch-size N]
  promptcert-bridge export-text --out DIR [--model stub-v1]
                                (--prompts FILE | PROMPT [PROMPT ...])
  promptcert-bridge serve [--model stub-v1] [--temperature T]
`;

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  const { positional, flags } = parseFlags(rest);
  try {
    switch (command) {
      case "export-embeddings": {
        if (!flags.data || !flags.out) throw new Error("--data and --out are required");
        const model = loadModel(flags.model ?? "stub-v1");
        const result = await exportEmbeddings(
          {
            dataDir: flags.data,
            modelId: model.id,
            outDir: flags.out,
            trainFraction: flags["train-fraction"]
              ? Number(flags["train-fraction"])
              : undefined,
            batchSize: flags["batch-size"] ? Number(flags["batch-size"]) : undefined,
          },
          model,
        );
        console.log(
          `exported ${result.numTrain} train / ${result.numTest} test rows, ` +
            `${result.classNames.length} classes -> ${result.manifestPath}`,
        );
        return 0;
      }
      case "export-text": {
        if (!flags.out) throw new Error("--out is required");
        const model = loadModel(flags.model ?? "stub-v1");
        let prompts = positional;
        if (flags.prompts) {
          const text = await fs.readFile(flags.prompts, "utf-8");
          prompts = text.split("\n").filter((line) => line.trim().length > 0);
        }
        const result = await exportTextCache(prompts, model, flags.out);
        console.log(
          `cached ${result.entries} distinct prompt embeddings -> ${result.matrixPath}`,
        );
        return 0;
      }
      case "serve": {
        const model = loadModel(flags.model ?? "stub-v1");
        const server = new OracleServer(model, {
          temperature: flags.temperature ? Number(flags.temperature) : undefined,
        });
        await server.serve(process.stdin, process.stdout);
        return 0;
      }
      default:
        process.stderr.write(USAGE);
        return 2;
    }
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
