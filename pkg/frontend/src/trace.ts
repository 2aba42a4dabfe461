/**
 * Reader for solver trace CSVs (format=proxsmooth-trace-v1).
 *
 * Cells are kept as the exact strings found in the file. Plots embed
 * those strings untouched, so a checksum of a plotted series equals a
 * checksum of the source column; numbers are derived only for scaling.
 */

export const FORMAT_MARKER = "proxsmooth-trace-v1";

export const COLUMNS = [
  "iter",
  "wall_time_s",
  "value_eps",
  "grad_eps_norm",
  "step_alpha",
  "lbar",
  "inner_iters",
  "backtracks",
  "relative_error",
  "descent_ok",
] as const;

export type ColumnName = (typeof COLUMNS)[number];

export interface TraceFile {
  path: string;
  header: Record<string, string>;
  /** row-major verbatim cells, one entry per column */
  cells: string[][];
}

export function parseTrace(text: string, path = "<memory>"): TraceFile {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== `# format=${FORMAT_MARKER}`) {
    throw new Error(`${path}: missing trace format marker`);
  }
  const header: Record<string, string> = {};
  let i = 1;
  for (; i < lines.length && lines[i].startsWith("# "); i++) {
    const body = lines[i].slice(2);
    const eq = body.indexOf("=");
    if (eq < 0) throw new Error(`${path}: bad header line ${JSON.stringify(lines[i])}`);
    header[body.slice(0, eq)] = body.slice(eq + 1);
  }
  if (i >= lines.length || lines[i] !== COLUMNS.join(",")) {
    throw new Error(`${path}: column row does not match the trace format`);
  }
  const cells: string[][] = [];
  for (i += 1; i < lines.length; i++) {
    const row = lines[i].split(",");
    if (row.length !== COLUMNS.length) {
      throw new Error(`${path}: row ${i + 1} has ${row.length} cells`);
    }
    cells.push(row);
  }
  return { path, header, cells };
}

/** verbatim column, empty cells included */
export function column(trace: TraceFile, name: ColumnName): string[] {
  const j = COLUMNS.indexOf(name);
  if (j < 0) throw new Error(`unknown column ${name}`);
  return trace.cells.map((row) => row[j]);
}
