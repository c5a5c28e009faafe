#!/usr/bin/env node
/**
 * embed-extract: item metadata -> binary .emb embedding matrix.
 *
 *   embed-extract extract <metadata.tsv> <out.emb> --model <model.idaw>
 *                 [--max-length 128] [--batch-size 32]
 *   embed-extract gen-model <out.idaw> [--seed 1234] [--hidden 64]
 *                 [--layers 2] [--heads 2] [--max-length 128]
 */

import { readFileSync, writeFileSync } from "node:fs";

import { extractToFile } from "./extract.js";
import { DEFAULT_CONFIG, deserializeModel, genModel, serializeModel } from "./model.js";

interface ParsedArgs {
  positional: string[];
  flags: Map<string, string>;
}

function parseArgs(argv: string[]): ParsedArgs {
  const positional: string[] = [];
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const value = argv[i + 1];
      if (value === undefined) throw new Error(`flag ${arg} needs a value`);
      flags.set(arg.slice(2), value);
      i++;
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

function intFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const value = Number.parseInt(raw, 10);
  if (!Number.isFinite(value) || value <= 0) throw new Error(`--${name} must be a positive integer`);
  return value;
}

function cmdExtract(args: ParsedArgs): number {
  const [metadataPath, outPath] = args.positional;
  if (!metadataPath || !outPath) {
    throw new Error("usage: embed-extract extract <metadata.tsv> <out.emb> --model <model.idaw>");
  }
  const modelPath = args.flags.get("model");
  if (!modelPath) throw new Error("--model <model.idaw> is required");
  const model = deserializeModel(readFileSync(modelPath));
  const bytes = extractToFile(model, metadataPath, outPath, {
    maxLength: intFlag(args.flags, "max-length", 128),
    batchSize: intFlag(args.flags, "batch-size", 32),
    log: (message) => console.error(message),
  });
  console.error(`wrote ${outPath} (${bytes} bytes, dim ${model.config.hidden})`);
  return 0;
}

function cmdGenModel(args: ParsedArgs): number {
  const [outPath] = args.positional;
  if (!outPath) throw new Error("usage: embed-extract gen-model <out.idaw> [--seed N]");
  const config = {
    hidden: intFlag(args.flags, "hidden", DEFAULT_CONFIG.hidden),
    layers: intFlag(args.flags, "layers", DEFAULT_CONFIG.layers),
    heads: intFlag(args.flags, "heads", DEFAULT_CONFIG.heads),
    maxLength: intFlag(args.flags, "max-length", DEFAULT_CONFIG.maxLength),
    seed: intFlag(args.flags, "seed", DEFAULT_CONFIG.seed),
  };
  writeFileSync(outPath, serializeModel(genModel(config)));
  console.error(`wrote ${outPath} (hidden ${config.hidden}, layers ${config.layers}, seed ${config.seed})`);
  return 0;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    const args = parseArgs(rest);
    if (command === "extract") return cmdExtract(args);
    if (command === "gen-model") return cmdGenModel(args);
    throw new Error(`unknown command ${command ?? "(none)"}; use extract or gen-model`);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exitCode = main(process.argv.slice(2));
