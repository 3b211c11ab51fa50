/**
 * RFC-4180 CSV reading for the simulator's output files.
 *
 * Values are kept as raw strings; numeric conversion happens at plot time so
 * the renderer can prove it never rewrites its inputs.
 */

export interface CsvTable {
  header: string[];
  rows: string[][];
}

/** Parse CSV text with quoted fields, CRLF or LF line endings. */
export function parseCsv(text: string): CsvTable {
  const rows: string[][] = [];
  let row: string[] = [];
  let fieldStart = true;
  let value = "";
  let inQuotes = false;
  let i = 0;
  const pushField = () => {
    row.push(value);
    value = "";
    fieldStart = true;
  };
  const pushRow = () => {
    pushField();
    rows.push(row);
    row = [];
  };
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          value += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i += 1;
        continue;
      }
      value += ch;
      i += 1;
      continue;
    }
    if (ch === '"' && fieldStart) {
      inQuotes = true;
      fieldStart = false;
      i += 1;
      continue;
    }
    if (ch === ",") {
      pushField();
      i += 1;
      continue;
    }
    if (ch === "\r" && text[i + 1] === "\n") {
      pushRow();
      i += 2;
      continue;
    }
    if (ch === "\n") {
      pushRow();
      i += 1;
      continue;
    }
    value += ch;
    fieldStart = false;
    i += 1;
  }
  if (value.length > 0 || row.length > 0) {
    pushRow();
  }
  if (rows.length === 0) {
    throw new Error("empty CSV");
  }
  const [header, ...body] = rows;
  return { header, rows: body.filter((r) => r.length > 1 || r[0] !== "") };
}

/** Numeric column by name; raises listing available columns when missing. */
export function numericColumn(table: CsvTable, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(
      `column "${name}" not found; available columns: ${table.header.join(", ")}`,
    );
  }
  return table.rows.map((r, k) => {
    const v = Number(r[idx]);
    if (Number.isNaN(v)) {
      throw new Error(`row ${k + 1} of column "${name}" is not numeric: "${r[idx]}"`);
    }
    return v;
  });
}
