#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { DEFAULT_LABEL_MAP } from "./labelMap.js";
import { PatternTagger } from "./taggers/pattern.js";
import { TransformersTagger } from "./taggers/transformers.js";
import { tagCorpus } from "./tagCorpus.js";
import { validateSpans } from "./validateSpans.js";
import { ModelLoadError, type NerConfig, type Tagger } from "./types.js";

function buildTagger(name: string, model: string): Tagger {
  if (name === "pattern") return new PatternTagger();
  return new TransformersTagger(model);
}

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("ner-tag")
    .command(
      ["$0", "tag"],
      "tag a corpus and emit a byte-offset span file",
      (cmd) =>
        cmd
          .option("in", { type: "string", demandOption: true, describe: "corpus JSONL" })
          .option("out", { type: "string", demandOption: true, describe: "spans JSONL" })
          .option("batch", { type: "number", default: 32 })
          .option("tagger", {
            choices: ["transformers", "pattern"] as const,
            default: "transformers",
            describe: "pattern = deterministic offline tagger",
          })
          .option("model", { type: "string", default: "Xenova/bert-base-NER" }),
    )
    .command("validate", "check a span file against its corpus", (cmd) =>
      cmd
        .option("corpus", { type: "string", demandOption: true })
        .option("spans", { type: "string", demandOption: true }),
    )
    .strict()
    .help()
    .parse();

  const command = argv._[0] ?? "tag";

  if (command === "validate") {
    const report = await validateSpans(argv.corpus as string, argv.spans as string);
    console.log(
      `validated ${report.total} spans: ${report.passed} passed, ${report.failed} failed`,
    );
    for (const failure of report.failures.slice(0, 20)) {
      console.error(
        `FAIL ${failure.doc_id} ${failure.start}..${failure.end}: ${failure.reason}`,
      );
    }
    return report.failed === 0 ? 0 : 1;
  }

  const config: NerConfig = {
    modelName: argv.model as string,
    batchSize: Math.max(1, argv.batch as number),
    labelMap: DEFAULT_LABEL_MAP,
  };
  const tagger = buildTagger(argv.tagger as string, config.modelName);
  try {
    const report = await tagCorpus(
      argv.in as string,
      argv.out as string,
      tagger,
      config,
      (line) => console.error(line),
    );
    console.log(
      `tagged ${report.docsProcessed} documents -> ${report.spansEmitted} spans ` +
        `(${report.failures.length} offset failures)`,
    );
    for (const failure of report.failures.slice(0, 20)) {
      console.error(`FAIL ${failure.doc_id}: ${failure.reason}`);
    }
    return report.failures.length === 0 ? 0 : 1;
  } catch (err) {
    if (err instanceof ModelLoadError) {
      console.error(`model load failure: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(String(err?.stack ?? err));
    process.exit(1);
  },
);
