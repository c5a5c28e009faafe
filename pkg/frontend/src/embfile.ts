/**
 * Binary `.emb` matrices (little-endian): magic "IDAE", u32 version=1,
 * u32 item_count, u32 dim, per item a u16 token byte length + UTF-8 token,
 * then item_count x dim float32 values row-major in token order.
 */

import { renameSync, writeFileSync } from "node:fs";

const MAGIC = Buffer.from("IDAE", "ascii");
const VERSION = 1;

export function serializeEmb(tokens: string[], rows: Float32Array[], dim: number): Buffer {
  if (tokens.length !== rows.length) throw new Error("one row per token required");
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(16);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(tokens.length, 8);
  header.writeUInt32LE(dim, 12);
  chunks.push(header);
  for (const token of tokens) {
    const raw = Buffer.from(token, "utf-8");
    if (raw.length > 0xffff) throw new Error(`token too long: ${token.slice(0, 32)}…`);
    const rec = Buffer.alloc(2 + raw.length);
    rec.writeUInt16LE(raw.length, 0);
    raw.copy(rec, 2);
    chunks.push(rec);
  }
  for (const row of rows) {
    if (row.length !== dim) throw new Error("row width mismatch");
    chunks.push(Buffer.from(row.buffer.slice(row.byteOffset, row.byteOffset + row.byteLength)));
  }
  return Buffer.concat(chunks);
}

/** Write via a temp file + rename so readers never see a partial matrix. */
export function writeEmbAtomic(path: string, blob: Buffer): void {
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, blob);
  renameSync(tmp, path);
}

export function parseEmb(blob: Buffer): { tokens: string[]; dim: number; rows: Float32Array[] } {
  if (blob.length < 16 || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new Error("not an .emb file (bad magic)");
  }
  if (blob.readUInt32LE(4) !== VERSION) {
    throw new Error(`unsupported .emb version ${blob.readUInt32LE(4)}`);
  }
  const count = blob.readUInt32LE(8);
  const dim = blob.readUInt32LE(12);
  let offset = 16;
  const tokens: string[] = [];
  for (let i = 0; i < count; i++) {
    const len = blob.readUInt16LE(offset);
    offset += 2;
    tokens.push(blob.subarray(offset, offset + len).toString("utf-8"));
    offset += len;
  }
  const rows: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    const row = new Float32Array(dim);
    for (let c = 0; c < dim; c++) row[c] = blob.readFloatLE(offset + 4 * c);
    offset += 4 * dim;
    rows.push(row);
  }
  if (offset !== blob.length) throw new Error(`trailing bytes at offset ${offset}`);
  return { tokens, dim, rows };
}
