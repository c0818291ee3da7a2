/**
 * Character-to-byte offset conversion.
 *
 * Taggers report offsets in JavaScript string (UTF-16 code unit) space; the
 * downstream annotation pipeline expects byte offsets into the UTF-8 text.
 * The conversion happens here, on the adapter side of the boundary, so the
 * consumer only ever sees one offset convention.
 */

/**
 * Cumulative UTF-8 byte length for every UTF-16 code-unit index of `text`.
 * `table[i]` is the byte offset of code unit i; `table[text.length]` is the
 * total byte length.
 */
export function byteOffsetTable(text: string): Uint32Array {
  const table = new Uint32Array(text.length + 1);
  let bytes = 0;
  let i = 0;
  while (i < text.length) {
    table[i] = bytes;
    const code = text.codePointAt(i)!;
    const units = code > 0xffff ? 2 : 1;
    if (code <= 0x7f) bytes += 1;
    else if (code <= 0x7ff) bytes += 2;
    else if (code <= 0xffff) bytes += 3;
    else bytes += 4;
    if (units === 2) table[i + 1] = bytes; // low surrogate maps past the char
    i += units;
  }
  table[text.length] = bytes;
  return table;
}

export function toByteSpan(
  table: Uint32Array,
  charStart: number,
  charEnd: number,
): { start: number; end: number } {
  return { start: table[charStart], end: table[charEnd] };
}
