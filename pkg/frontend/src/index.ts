export { CLS_ID, VOCAB_SIZE, tokenize } from "./tokenizer.js";
export {
  DEFAULT_CONFIG,
  deserializeModel,
  encodeText,
  genModel,
  serializeModel,
  type EncoderConfig,
  type EncoderModel,
} from "./model.js";
export { assembleText, parseMetadata, type ItemMetadata } from "./metadata.js";
export { parseEmb, serializeEmb, writeEmbAtomic } from "./embfile.js";
export { extractToBuffer, extractToFile, type ExtractOptions } from "./extract.js";
