/**
 * The text encoder: token + position tables feeding pre-norm self-attention
 * blocks; an item's vector is the classification token's row after the last
 * block (no extra pooling or normalization).
 *
 * Weights live in a binary `.idaw` container (magic "IDAW", u32 version=1,
 * u32 tensor_count, then per tensor: u16 name length, UTF-8 name, u8 rank,
 * rank x u32 dims, float32 data, little-endian, sorted by name). `genModel`
 * fills the container from a seeded generator — a frozen, reproducible
 * encoder for environments without a trained checkpoint; any checkpoint
 * exported into the same layout loads identically.
 */

import { gaussian } from "./rng.js";
import { addBias, geluInPlace, layerNorm, matmul, softmaxRowsInPlace } from "./nn.js";
import { CLS_ID, VOCAB_SIZE, tokenize } from "./tokenizer.js";

export interface EncoderConfig {
  hidden: number;
  layers: number;
  heads: number;
  maxLength: number;
  seed: number;
}

export const DEFAULT_CONFIG: EncoderConfig = {
  hidden: 64,
  layers: 2,
  heads: 2,
  maxLength: 128,
  seed: 1234,
};

export interface EncoderModel {
  config: EncoderConfig;
  tensors: Map<string, { dims: number[]; data: Float32Array }>;
}

const MAGIC = Buffer.from("IDAW", "ascii");
const VERSION = 1;

function tensorNames(config: EncoderConfig): Array<[string, number[]]> {
  const d = config.hidden;
  const names: Array<[string, number[]]> = [
    ["token_table", [VOCAB_SIZE, d]],
    ["pos_table", [config.maxLength, d]],
  ];
  for (let i = 0; i < config.layers; i++) {
    const pre = `layers.${i}`;
    names.push([`${pre}.ln_attn.gain`, [d]], [`${pre}.ln_attn.bias`, [d]]);
    for (const p of ["q", "k", "v", "o"]) {
      names.push([`${pre}.attn.w${p}`, [d, d]], [`${pre}.attn.b${p}`, [d]]);
    }
    names.push([`${pre}.ln_ffn.gain`, [d]], [`${pre}.ln_ffn.bias`, [d]]);
    names.push([`${pre}.ffn.w1`, [d, 4 * d]], [`${pre}.ffn.b1`, [4 * d]]);
    names.push([`${pre}.ffn.w2`, [4 * d, d]], [`${pre}.ffn.b2`, [d]]);
  }
  return names;
}

export function genModel(config: EncoderConfig): EncoderModel {
  if (config.hidden % config.heads !== 0) {
    throw new Error("hidden must be divisible by heads");
  }
  const draw = gaussian(config.seed >>> 0);
  const tensors = new Map<string, { dims: number[]; data: Float32Array }>();
  for (const [name, dims] of tensorNames(config)) {
    const size = dims.reduce((a, b) => a * b, 1);
    const data = new Float32Array(size);
    if (name.endsWith(".gain")) {
      data.fill(1);
    } else if (name.endsWith(".bias") || /\.b[qkvo12]$/.test(name)) {
      // biases stay zero
    } else {
      const fanIn = dims.length === 2 ? dims[0] : config.hidden;
      const std = 1.0 / Math.sqrt(fanIn);
      for (let i = 0; i < size; i++) data[i] = Math.fround(draw() * std);
    }
    tensors.set(name, { dims, data });
  }
  return { config, tensors };
}

export function serializeModel(model: EncoderModel): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(12);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(model.tensors.size + 1, 8); // +1 for the meta tensor
  chunks.push(header);

  const c = model.config;
  const entries: Array<[string, number[], Float32Array]> = [
    ["meta", [5], Float32Array.from([c.hidden, c.layers, c.heads, c.maxLength, c.seed])],
  ];
  for (const [name, t] of model.tensors) entries.push([name, t.dims, t.data]);
  entries.sort((a, b) => (a[0] < b[0] ? -1 : 1));

  for (const [name, dims, data] of entries) {
    const nameBytes = Buffer.from(name, "utf-8");
    const head = Buffer.alloc(3 + nameBytes.length + 4 * dims.length);
    head.writeUInt16LE(nameBytes.length, 0);
    head.writeUInt8(dims.length, 2);
    nameBytes.copy(head, 3);
    dims.forEach((dim, i) => head.writeUInt32LE(dim, 3 + nameBytes.length + 4 * i));
    chunks.push(head, Buffer.from(data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength)));
  }
  return Buffer.concat(chunks);
}

export function deserializeModel(blob: Buffer): EncoderModel {
  if (blob.length < 12 || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new Error("not a model file (bad magic)");
  }
  if (blob.readUInt32LE(4) !== VERSION) {
    throw new Error(`unsupported model version ${blob.readUInt32LE(4)}`);
  }
  const count = blob.readUInt32LE(8);
  let offset = 12;
  const raw = new Map<string, { dims: number[]; data: Float32Array }>();
  for (let t = 0; t < count; t++) {
    const nameLen = blob.readUInt16LE(offset);
    const rank = blob.readUInt8(offset + 2);
    offset += 3;
    const name = blob.subarray(offset, offset + nameLen).toString("utf-8");
    offset += nameLen;
    const dims: number[] = [];
    for (let r = 0; r < rank; r++) {
      dims.push(blob.readUInt32LE(offset));
      offset += 4;
    }
    const size = dims.reduce((a, b) => a * b, 1);
    const data = new Float32Array(size);
    for (let i = 0; i < size; i++) data[i] = blob.readFloatLE(offset + 4 * i);
    offset += 4 * size;
    raw.set(name, { dims, data });
  }
  if (offset !== blob.length) throw new Error(`trailing bytes at offset ${offset}`);
  const meta = raw.get("meta");
  if (!meta || meta.data.length !== 5) throw new Error("model file has no meta tensor");
  raw.delete("meta");
  const [hidden, layers, heads, maxLength, seed] = Array.from(meta.data, Math.round);
  const config: EncoderConfig = { hidden, layers, heads, maxLength, seed };
  for (const [name, dims] of tensorNames(config)) {
    const t = raw.get(name);
    if (!t) throw new Error(`model file missing tensor ${name}`);
    if (t.dims.join("x") !== dims.join("x")) {
      throw new Error(`tensor ${name} has shape ${t.dims} (expected ${dims})`);
    }
  }
  return { config, tensors: raw };
}

/** Encode one text: the classification row of the last block. */
export function encodeText(model: EncoderModel, text: string, maxLength?: number): Float32Array {
  const { config } = model;
  const limit = Math.min(maxLength ?? config.maxLength, config.maxLength);
  const ids = tokenize(text, limit);
  const T = ids.length;
  const d = config.hidden;
  const heads = config.heads;
  const dh = d / heads;
  const get = (name: string) => model.tensors.get(name)!.data;

  let x = new Float32Array(T * d);
  const tokenTable = get("token_table");
  const posTable = get("pos_table");
  for (let t = 0; t < T; t++) {
    const row = ids[t] * d;
    for (let c = 0; c < d; c++) {
      x[t * d + c] = Math.fround(tokenTable[row + c] + posTable[t * d + c]);
    }
  }

  const scale = 1.0 / Math.sqrt(dh);
  for (let layer = 0; layer < config.layers; layer++) {
    const pre = `layers.${layer}`;
    const h = layerNorm(x, get(`${pre}.ln_attn.gain`), get(`${pre}.ln_attn.bias`), T, d);
    const q = matmul(h, get(`${pre}.attn.wq`), T, d, d);
    addBias(q, get(`${pre}.attn.bq`), T, d);
    const k = matmul(h, get(`${pre}.attn.wk`), T, d, d);
    addBias(k, get(`${pre}.attn.bk`), T, d);
    const v = matmul(h, get(`${pre}.attn.wv`), T, d, d);
    addBias(v, get(`${pre}.attn.bv`), T, d);

    const merged = new Float32Array(T * d);
    const scores = new Float32Array(T * T);
    for (let head = 0; head < heads; head++) {
      const off = head * dh;
      for (let i = 0; i < T; i++) {
        for (let j = 0; j < T; j++) {
          let acc = 0;
          for (let c = 0; c < dh; c++) {
            acc = Math.fround(acc + Math.fround(q[i * d + off + c] * k[j * d + off + c]));
          }
          scores[i * T + j] = Math.fround(acc * scale);
        }
      }
      softmaxRowsInPlace(scores, T, T);
      for (let i = 0; i < T; i++) {
        for (let c = 0; c < dh; c++) {
          let acc = 0;
          for (let j = 0; j < T; j++) {
            acc = Math.fround(acc + Math.fround(scores[i * T + j] * v[j * d + off + c]));
          }
          merged[i * d + off + c] = acc;
        }
      }
    }
    const attnOut = matmul(merged, get(`${pre}.attn.wo`), T, d, d);
    addBias(attnOut, get(`${pre}.attn.bo`), T, d);
    for (let i = 0; i < x.length; i++) x[i] = Math.fround(x[i] + attnOut[i]);

    const h2 = layerNorm(x, get(`${pre}.ln_ffn.gain`), get(`${pre}.ln_ffn.bias`), T, d);
    const f1 = matmul(h2, get(`${pre}.ffn.w1`), T, d, 4 * d);
    addBias(f1, get(`${pre}.ffn.b1`), T, 4 * d);
    geluInPlace(f1);
    const f2 = matmul(f1, get(`${pre}.ffn.w2`), T, 4 * d, d);
    addBias(f2, get(`${pre}.ffn.b2`), T, d);
    for (let i = 0; i < x.length; i++) x[i] = Math.fround(x[i] + f2[i]);
  }
  return x.slice(0, d); // classification token row
}

export { CLS_ID, VOCAB_SIZE };
