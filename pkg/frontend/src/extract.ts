/** Metadata file -> encoder -> .emb, batched, written atomically. */

import { readFileSync } from "node:fs";

import { serializeEmb, writeEmbAtomic } from "./embfile.js";
import { assembleText, parseMetadata } from "./metadata.js";
import { EncoderModel, encodeText } from "./model.js";

export interface ExtractOptions {
  maxLength?: number;
  batchSize?: number;
  log?: (message: string) => void;
}

export function extractToBuffer(
  model: EncoderModel, metadataContent: string, options: ExtractOptions = {},
): Buffer {
  const log = options.log ?? (() => {});
  const batchSize = options.batchSize ?? 32;
  const records = parseMetadata(metadataContent);
  if (records.length === 0) throw new Error("metadata file has no records");
  const tokens: string[] = [];
  const rows: Float32Array[] = [];
  for (let start = 0; start < records.length; start += batchSize) {
    const batch = records.slice(start, start + batchSize);
    for (const item of batch) {
      const { text, usedFallback } = assembleText(item);
      if (usedFallback) log(`warning: ${item.token} has no text, using its token`);
      tokens.push(item.token);
      rows.push(encodeText(model, text, options.maxLength));
    }
    log(`encoded ${Math.min(start + batchSize, records.length)}/${records.length}`);
  }
  return serializeEmb(tokens, rows, model.config.hidden);
}

export function extractToFile(
  model: EncoderModel, metadataPath: string, outPath: string, options: ExtractOptions = {},
): number {
  const content = readFileSync(metadataPath, "utf-8");
  const blob = extractToBuffer(model, content, options);
  writeEmbAtomic(outPath, blob);
  return blob.length;
}
