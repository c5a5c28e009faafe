/**
 * Byte-level tokenizer: UTF-8 bytes are the vocabulary (0..255), plus the
 * classification token prepended at position 0. No external vocab files, so
 * any text tokenizes deterministically.
 */

export const CLS_ID = 256;
export const VOCAB_SIZE = 257;

export function tokenize(text: string, maxLength: number): Int32Array {
  const bytes = Buffer.from(text, "utf-8");
  const keep = Math.min(bytes.length, maxLength - 1); // CLS takes one slot
  const ids = new Int32Array(keep + 1);
  ids[0] = CLS_ID;
  for (let i = 0; i < keep; i++) ids[i + 1] = bytes[i];
  return ids;
}
