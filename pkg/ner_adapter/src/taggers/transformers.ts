import { ModelLoadError, type RawEntity, type Tagger } from "../types.js";

/**
 * Transformer-backed tagger via @xenova/transformers (ONNX runtime).
 *
 * Loaded lazily: the dependency is optional and model weights are fetched on
 * first use, so offline environments use the pattern tagger instead. Label
 * vocabulary depends on the model; the label map must cover it.
 */
export class TransformersTagger implements Tagger {
  private pipe: any = null;
  private seenLabels = new Set<string>();

  constructor(
    private readonly modelName: string = "Xenova/bert-base-NER",
  ) {}

  labels(): string[] {
    // the model's full vocabulary is unknown until runtime; report what we
    // have seen so callers can still validate their map incrementally
    return [...this.seenLabels];
  }

  private async init(): Promise<void> {
    if (this.pipe !== null) return;
    let pipeline: any;
    // indirect specifier: the dependency is optional and may be absent
    const moduleName = "@xenova/transformers";
    try {
      ({ pipeline } = await import(moduleName));
    } catch (err) {
      throw new ModelLoadError(
        `@xenova/transformers is not installed; use --tagger pattern or install the optional dependency (${err})`,
      );
    }
    try {
      this.pipe = await pipeline("token-classification", this.modelName, {
        // word-level aggregation gives us contiguous surface chunks
        aggregation_strategy: "simple",
      } as any);
    } catch (err) {
      throw new ModelLoadError(`failed to load NER model ${this.modelName}: ${err}`);
    }
  }

  async tag(texts: string[]): Promise<RawEntity[][]> {
    await this.init();
    const results: RawEntity[][] = [];
    for (const text of texts) {
      const output = await this.pipe(text);
      const entities: RawEntity[] = [];
      let cursor = 0;
      for (const item of output) {
        const label: string = item.entity_group ?? item.entity ?? "MISC";
        this.seenLabels.add(label);
        let start: number | undefined = item.start ?? undefined;
        let end: number | undefined = item.end ?? undefined;
        if (start === undefined || end === undefined) {
          // some runtimes omit offsets; locate the word left to right
          const word = String(item.word ?? "").replace(/^##/, "");
          if (!word) continue;
          const at = text.indexOf(word, cursor);
          if (at < 0) continue;
          start = at;
          end = at + word.length;
        }
        cursor = end;
        entities.push({ start, end, label });
      }
      results.push(entities);
    }
    return results;
  }
}
