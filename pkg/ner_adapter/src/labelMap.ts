import { LabelMapError } from "./types.js";

/**
 * Default collapse of common tagger label vocabularies onto the coarse
 * categories the annotation pipeline uses (PERS, ORG, LOC, MISC).
 */
export const DEFAULT_LABEL_MAP: Record<string, string> = {
  PER: "PERS",
  PERS: "PERS",
  PERSON: "PERS",
  ORG: "ORG",
  ORGANIZATION: "ORG",
  COMPANY: "ORG",
  LOC: "LOC",
  LOCATION: "LOC",
  GPE: "LOC",
  FAC: "LOC",
  MISC: "MISC",
  PRODUCT: "MISC",
  EVENT: "MISC",
  WORK_OF_ART: "MISC",
  NORP: "MISC",
};

/** Strip BIO prefixes (B-PER / I-PER) before lookup. */
function canonical(label: string): string {
  return label.replace(/^[BIES]-/, "").toUpperCase();
}

export function mapLabel(label: string, labelMap: Record<string, string>): string {
  const mapped = labelMap[canonical(label)];
  if (mapped === undefined) {
    throw new LabelMapError(
      `label map does not cover tagger label "${label}"; add it to the map`,
    );
  }
  return mapped;
}

/** The map must be total over the tagger's label set. */
export function assertLabelMapTotal(
  taggerLabels: string[],
  labelMap: Record<string, string>,
): void {
  const missing = taggerLabels.filter((l) => labelMap[canonical(l)] === undefined);
  if (missing.length > 0) {
    throw new LabelMapError(`label map misses tagger labels: ${missing.join(", ")}`);
  }
}
