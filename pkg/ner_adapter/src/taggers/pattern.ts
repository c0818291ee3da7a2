import type { RawEntity, Tagger } from "../types.js";

/**
 * Deterministic rule-based tagger.
 *
 * Finds runs of capitalized tokens and labels them with suffix and
 * gazetteer heuristics. It exists so the adapter (offset conversion,
 * validation, file formats) is fully testable offline and reproducible;
 * swap in the transformer tagger for real corpora.
 */

const ORG_SUFFIXES = new Set([
  "FC", "F.C.", "CF", "SK", "AG", "SE", "Inc", "Inc.", "Ltd", "Ltd.", "LLC",
  "Corp", "Corp.", "Co", "Co.", "Company", "Corporation", "Club", "United",
  "Rovers", "Wanderers", "Athletic",
]);

const LOC_GAZETTEER = new Set([
  "Lisbon", "Paris", "Madrid", "London", "Tokyo", "Osaka", "Riyadh",
  "Barcelona", "Manchester", "Turin", "Zürich", "Zurich", "São Paulo",
  "Munich", "Vienna", "Belgrade", "Sofia", "Portugal", "Spain", "France",
  "Italy", "Germany", "Japan", "Brazil", "Argentina", "Europe", "America",
]);

// common sentence-starting function words never form a one-token entity
const SENTENCE_STARTERS = new Set([
  "The", "A", "An", "In", "On", "At", "By", "He", "She", "It", "They", "We",
  "I", "You", "This", "That", "These", "Those", "After", "Before", "When",
  "While", "During", "His", "Her", "Their", "Its", "Fans", "Rain", "But",
  "And", "Or", "If", "As", "For", "From", "With", "Which", "Who", "What",
]);

const NAME_TOKEN = /\p{Lu}[\p{L}\p{N}'’.-]*/uy;
const CONNECTORS = new Set(["of", "de", "van", "der", "da", "di", "bin", "al", "el"]);

function isAcronym(token: string): boolean {
  return /^[A-Z]{2,}[0-9]*$/.test(token) || /^[A-Z]+[0-9]+$/.test(token);
}

function labelFor(tokens: string[]): string {
  const surface = tokens.join(" ");
  if (LOC_GAZETTEER.has(surface)) return "LOC";
  if (tokens.some((t) => ORG_SUFFIXES.has(t))) return "ORG";
  if (tokens.length === 1 && isAcronym(tokens[0])) return "MISC";
  return "PER";
}

interface Run {
  start: number;
  end: number;
  tokens: string[];
}

function findRuns(text: string): Run[] {
  const runs: Run[] = [];
  let current: Run | null = null;
  let i = 0;
  while (i < text.length) {
    NAME_TOKEN.lastIndex = i;
    const match = NAME_TOKEN.exec(text);
    if (match && match.index === i) {
      let token = match[0];
      // trailing sentence punctuation is not part of the token
      const trimmed = token.replace(/[.',’-]+$/, "");
      if (trimmed.length > 0 && trimmed !== token && !ORG_SUFFIXES.has(token)) {
        token = trimmed;
      }
      if (current === null) {
        current = { start: i, end: i + token.length, tokens: [token] };
      } else {
        current.end = i + token.length;
        current.tokens.push(token);
      }
      i += token.length;
      // a single connector keeps the run alive ("Jorge de Sousa")
      const connector = /(\s)(\p{Ll}+)(\s)(?=\p{Lu})/uy;
      connector.lastIndex = i;
      const conn = connector.exec(text);
      if (conn && CONNECTORS.has(conn[2])) {
        current.end = i + conn[1].length + conn[2].length;
        current.tokens.push(conn[2]);
        i = current.end + conn[3].length; // next iteration appends the name
        continue;
      }
      if (text[i] === " ") {
        NAME_TOKEN.lastIndex = i + 1;
        const next = NAME_TOKEN.exec(text);
        if (next && next.index === i + 1) {
          i += 1;
          continue;
        }
      }
      runs.push(current);
      current = null;
    } else {
      if (current !== null) {
        runs.push(current);
        current = null;
      }
      i += 1;
    }
  }
  if (current !== null) runs.push(current);
  return runs;
}

export class PatternTagger implements Tagger {
  labels(): string[] {
    return ["PER", "ORG", "LOC", "MISC"];
  }

  async tag(texts: string[]): Promise<RawEntity[][]> {
    return texts.map((text) => {
      const entities: RawEntity[] = [];
      for (const run of findRuns(text)) {
        const atSentenceStart =
          run.start === 0 || /[.!?]\s+$/.test(text.slice(0, run.start));
        if (
          run.tokens.length === 1 &&
          SENTENCE_STARTERS.has(run.tokens[0]) &&
          atSentenceStart
        ) {
          continue;
        }
        entities.push({
          start: run.start,
          end: run.end,
          label: labelFor(run.tokens),
        });
      }
      return entities;
    });
  }
}
