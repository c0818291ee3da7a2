import { createReadStream, createWriteStream } from "node:fs";
import { createInterface } from "node:readline";

export async function readJsonl<T>(path: string): Promise<T[]> {
  const rows: T[] = [];
  const reader = createInterface({
    input: createReadStream(path, { encoding: "utf-8" }),
    crlfDelay: Infinity,
  });
  for await (const line of reader) {
    const trimmed = line.trim();
    if (trimmed.length > 0) rows.push(JSON.parse(trimmed) as T);
  }
  return rows;
}

export async function writeJsonl(path: string, rows: unknown[]): Promise<void> {
  const stream = createWriteStream(path, { encoding: "utf-8" });
  for (const row of rows) {
    stream.write(JSON.stringify(row) + "\n");
  }
  await new Promise<void>((resolve, reject) => {
    stream.end(() => resolve());
    stream.on("error", reject);
  });
}
