import { readJsonl } from "./jsonl.js";
import type { CorpusDoc, SpanRow, ValidationReport } from "./types.js";

/**
 * Assert that every span's surface equals the UTF-8 byte slice of its
 * document. This is the contract the annotation pipeline relies on.
 */
export async function validateSpans(
  corpusPath: string,
  spansPath: string,
): Promise<ValidationReport> {
  const docs = await readJsonl<CorpusDoc>(corpusPath);
  const spans = await readJsonl<SpanRow>(spansPath);
  const bodies = new Map(docs.map((d) => [d.doc_id, Buffer.from(d.text, "utf-8")]));

  const report: ValidationReport = { total: 0, passed: 0, failed: 0, failures: [] };
  for (const span of spans) {
    report.total += 1;
    const body = bodies.get(span.doc_id);
    let reason: string | null = null;
    if (body === undefined) {
      reason = `unknown doc_id ${span.doc_id}`;
    } else if (!(0 <= span.start && span.start < span.end && span.end <= body.length)) {
      reason = `offsets ${span.start}..${span.end} out of bounds (${body.length} bytes)`;
    } else {
      const slice = body.subarray(span.start, span.end).toString("utf-8");
      if (slice !== span.surface) {
        reason = `slice ${JSON.stringify(slice)} != surface ${JSON.stringify(span.surface)}`;
      }
    }
    if (reason === null) {
      report.passed += 1;
    } else {
      report.failed += 1;
      report.failures.push({
        doc_id: span.doc_id,
        start: span.start,
        end: span.end,
        reason,
      });
    }
  }
  return report;
}
