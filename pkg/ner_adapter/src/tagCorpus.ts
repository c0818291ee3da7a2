import { mapLabel } from "./labelMap.js";
import { byteOffsetTable, toByteSpan } from "./offsets.js";
import { readJsonl, writeJsonl } from "./jsonl.js";
import type {
  CorpusDoc,
  NerConfig,
  SpanRow,
  TagReport,
  Tagger,
} from "./types.js";

/**
 * Run the tagger over a corpus file and emit a span file.
 *
 * Offsets are converted to bytes here and every emitted row is re-validated
 * against the UTF-8 slice of its document; an entity whose offsets fail the
 * slice check is dropped and reported rather than written.
 */
export async function tagCorpus(
  corpusPath: string,
  outPath: string,
  tagger: Tagger,
  config: NerConfig,
  log: (line: string) => void = () => {},
): Promise<TagReport> {
  const docs = await readJsonl<CorpusDoc>(corpusPath);
  const report: TagReport = { docsProcessed: 0, spansEmitted: 0, failures: [] };
  const rows: SpanRow[] = [];

  for (let offset = 0; offset < docs.length; offset += config.batchSize) {
    const batch = docs.slice(offset, offset + config.batchSize);
    const tagged = await tagger.tag(batch.map((d) => d.text));
    for (let j = 0; j < batch.length; j++) {
      const doc = batch[j];
      const table = byteOffsetTable(doc.text);
      const utf8 = Buffer.from(doc.text, "utf-8");
      for (const entity of tagged[j]) {
        const surface = doc.text.slice(entity.start, entity.end);
        const { start, end } = toByteSpan(table, entity.start, entity.end);
        const slice = utf8.subarray(start, end).toString("utf-8");
        if (slice !== surface || surface.length === 0) {
          report.failures.push({
            doc_id: doc.doc_id,
            reason:
              `offset mismatch at chars ${entity.start}..${entity.end}: ` +
              `slice ${JSON.stringify(slice)} != surface ${JSON.stringify(surface)}`,
          });
          continue;
        }
        rows.push({
          doc_id: doc.doc_id,
          start,
          end,
          surface,
          label: mapLabel(entity.label, config.labelMap),
        });
      }
      report.docsProcessed += 1;
    }
    log(`tagged ${report.docsProcessed}/${docs.length} documents`);
  }

  report.spansEmitted = rows.length;
  await writeJsonl(outPath, rows);
  return report;
}
