/**
 * Display-side CSV parsing. The server is the authority on CSV semantics;
 * this only needs to be faithful enough to preview the uploaded table and
 * render the review grid, so rows are padded to header width for layout.
 */

export interface ParsedCsv {
  columns: string[];
  rows: string[][];
}

export function parseCsvText(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let field = "";
  let inQuotes = false;
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i += 1;
        continue;
      }
      field += ch;
      i += 1;
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      i += 1;
      continue;
    }
    if (ch === ",") {
      row.push(field);
      field = "";
      i += 1;
      continue;
    }
    if (ch === "\n" || ch === "\r") {
      if (ch === "\r" && text[i + 1] === "\n") {
        i += 1;
      }
      row.push(field);
      rows.push(row);
      row = [];
      field = "";
      i += 1;
      continue;
    }
    field += ch;
    i += 1;
  }
  if (field !== "" || row.length > 0) {
    row.push(field);
    rows.push(row);
  }
  return rows;
}

export function parseForDisplay(text: string): ParsedCsv {
  const data = parseCsvText(text).filter(
    (row) => !(row.length === 1 && row[0] === ""),
  );
  if (data.length === 0) {
    return { columns: [], rows: [] };
  }
  const columns = data[0];
  const rows = data.slice(1).map((row) => {
    const out = row.slice(0, columns.length);
    while (out.length < columns.length) {
      out.push("");
    }
    return out;
  });
  return { columns, rows };
}
