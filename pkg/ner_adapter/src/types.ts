/** Shared row shapes for the corpus and span JSONL files. */

export interface CorpusDoc {
  doc_id: string;
  title: string;
  text: string;
}

/** One emitted span row; start/end are BYTE offsets into the UTF-8 text. */
export interface SpanRow {
  doc_id: string;
  start: number;
  end: number;
  surface: string;
  label: string;
  qid?: string;
}

/** A tagger hit in character-offset space, before byte conversion. */
export interface RawEntity {
  start: number;
  end: number;
  label: string;
}

export interface Tagger {
  /** Tag a batch of texts; one entity list per input text. */
  tag(texts: string[]): Promise<RawEntity[][]>;
  /** Every label this tagger can emit; the label map must cover them all. */
  labels(): string[];
}

export interface NerConfig {
  modelName: string;
  batchSize: number;
  /** tagger label -> coarse NE category (e.g. PER -> PERS) */
  labelMap: Record<string, string>;
}

export interface TagFailure {
  doc_id: string;
  reason: string;
}

export interface TagReport {
  docsProcessed: number;
  spansEmitted: number;
  failures: TagFailure[];
}

export interface ValidationFailure {
  doc_id: string;
  start: number;
  end: number;
  reason: string;
}

export interface ValidationReport {
  total: number;
  passed: number;
  failed: number;
  failures: ValidationFailure[];
}

export class OffsetMismatchError extends Error {}
export class ModelLoadError extends Error {}
export class LabelMapError extends Error {}
