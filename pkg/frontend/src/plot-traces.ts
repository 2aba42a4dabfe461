/**
 * Batch-render solver traces to SVG.
 *
 *   plot-traces --in results/ --out figs/ [--x iter] [--y relative_error]
 *               [--group-by experiment] [--trial 0] [--logy]
 *
 * Walks --in for trial<N>.csv files, keeps the chosen trial of every
 * label, groups figures by a header key (one SVG per group) and draws
 * one series per trace. Columns are rendered verbatim; nothing is
 * aggregated or recomputed here.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { pathToFileURL } from "node:url";
import { COLUMNS, ColumnName, TraceFile, column, parseTrace } from "./trace.js";
import { Series, renderFigure } from "./svg.js";

export interface TraceArgs {
  inDir: string;
  outDir: string;
  x: ColumnName;
  y: ColumnName;
  groupBy: string;
  trial: number;
  logy: boolean;
}

export function parseArgs(argv: string[]): TraceArgs {
  const args: TraceArgs = {
    inDir: "",
    outDir: "",
    x: "iter",
    y: "relative_error",
    groupBy: "experiment",
    trial: 0,
    logy: false,
  };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${a} needs a value`);
      return argv[++i];
    };
    if (a === "--in") args.inDir = next();
    else if (a === "--out") args.outDir = next();
    else if (a === "--x") args.x = next() as ColumnName;
    else if (a === "--y") args.y = next() as ColumnName;
    else if (a === "--group-by") args.groupBy = next();
    else if (a === "--trial") args.trial = Number(next());
    else if (a === "--logy") args.logy = true;
    else throw new Error(`unknown flag ${a}`);
  }
  if (!args.inDir || !args.outDir) throw new Error("--in and --out are required");
  if (!COLUMNS.includes(args.x)) throw new Error(`--x must be a trace column, got ${args.x}`);
  if (!COLUMNS.includes(args.y)) throw new Error(`--y must be a trace column, got ${args.y}`);
  return args;
}

export function findTraceFiles(root: string): string[] {
  const out: string[] = [];
  const walk = (dir: string) => {
    for (const entry of fs.readdirSync(dir, { withFileTypes: true })) {
      const full = path.join(dir, entry.name);
      if (entry.isDirectory()) walk(full);
      else if (/^trial\d+\.csv$/.test(entry.name)) out.push(full);
    }
  };
  walk(root);
  return out.sort();
}

const safe = (s: string) => s.replace(/[^A-Za-z0-9._-]+/g, "_") || "figure";

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const traces: TraceFile[] = [];
  for (const file of findTraceFiles(args.inDir)) {
    const t = parseTrace(fs.readFileSync(file, "utf8"), file);
    if (Number(t.header["trial"] ?? "0") === args.trial) traces.push(t);
  }
  if (traces.length === 0) {
    console.error(`no trial${args.trial} traces under ${args.inDir}`);
    return 1;
  }
  const groups = new Map<string, TraceFile[]>();
  for (const t of traces) {
    const key = t.header[args.groupBy] ?? "(missing)";
    const bucket = groups.get(key) ?? [];
    bucket.push(t);
    groups.set(key, bucket);
  }
  fs.mkdirSync(args.outDir, { recursive: true });
  for (const [key, members] of [...groups.entries()].sort()) {
    members.sort(
      (a, b) =>
        (a.header["label"] ?? "").localeCompare(b.header["label"] ?? "") ||
        Number(a.header["k1"] ?? 0) - Number(b.header["k1"] ?? 0),
    );
    // only suffix k1 when the group mixes sizes, else labels collide
    const sizes = new Set(members.map((t) => t.header["k1"] ?? ""));
    const series: Series[] = members.map((t) => {
      const base = t.header["label"] ?? t.header["alg"] ?? path.basename(t.path);
      const k1 = t.header["k1"];
      return {
        label: sizes.size > 1 && k1 !== undefined ? `${base} k1=${k1}` : base,
        xs: column(t, args.x),
        ys: column(t, args.y),
      };
    });
    const svg = renderFigure(series, {
      title: `${key} (trial ${args.trial})`,
      xLabel: args.x,
      yLabel: args.y,
      logy: args.logy,
    });
    const file = path.join(args.outDir, `${safe(key)}.svg`);
    fs.writeFileSync(file, svg);
    console.log(`wrote ${file} (${series.length} series)`);
  }
  return 0;
}

if (
  process.argv[1] &&
  import.meta.url === pathToFileURL(process.argv[1]).href
) {
  process.exit(main(process.argv.slice(2)));
}
