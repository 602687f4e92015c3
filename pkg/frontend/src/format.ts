/**
 * Display helpers.
 *
 * The design card shows values exactly as serialized by the service: the
 * literal substrings are pulled out of the raw response text, never
 * re-stringified from parsed floats (JS and the server disagree on a few
 * shortest-round-trip spellings).  Rounded values are allowed only in
 * clearly labeled "approx" annotations.
 */

/**
 * Extract the literal number spellings of a top-level array field from
 * the raw JSON text (pretty-printed, sorted keys).  Returns the literals
 * in order of appearance.
 */
export function extractArrayLiterals(rawText: string, field: string): string[] {
  const start = rawText.indexOf(`"${field}"`);
  if (start < 0) return [];
  const open = rawText.indexOf("[", start);
  if (open < 0) return [];
  let depth = 0;
  let end = open;
  for (; end < rawText.length; end++) {
    const ch = rawText[end];
    if (ch === "[") depth++;
    else if (ch === "]") {
      depth--;
      if (depth === 0) break;
    }
  }
  const body = rawText.slice(open + 1, end);
  const matches = body.match(/-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?/g);
  return matches ?? [];
}

/** Literal spelling of a scalar field ("value": -1.82...). */
export function extractScalarLiteral(rawText: string, field: string): string | null {
  const re = new RegExp(`"${field}"\\s*:\\s*(-?\\d+(?:\\.\\d+)?(?:[eE][+-]?\\d+)?)`);
  const m = rawText.match(re);
  return m ? m[1] : null;
}

/** Labeled approximate rendering for axis ticks and summaries. */
export function approx(x: number, digits = 3): string {
  return `≈ ${x.toPrecision(digits)}`;
}

export function formatPercent(w: number, digits = 1): string {
  return `${(w * 100).toFixed(digits)}%`;
}
