export { byteOffsetTable, toByteSpan } from "./offsets.js";
export { DEFAULT_LABEL_MAP, assertLabelMapTotal, mapLabel } from "./labelMap.js";
export { PatternTagger } from "./taggers/pattern.js";
export { TransformersTagger } from "./taggers/transformers.js";
export { tagCorpus } from "./tagCorpus.js";
export { validateSpans } from "./validateSpans.js";
export * from "./types.js";
