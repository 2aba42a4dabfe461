/**
 * Render success-probability curves from a bench summary.csv.
 *
 *   plot-success --in results/<experiment>/ --out figs/ [--logy]
 *
 * One series per (algorithm, threshold) pair, probability against k1,
 * every threshold present in the file. Values are the file's own
 * strings, rendered verbatim.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { pathToFileURL } from "node:url";
import { SummaryRow, parseSummary } from "./summary.js";
import { Series, renderFigure } from "./svg.js";

export interface SuccessArgs {
  inPath: string;
  outDir: string;
  logy: boolean;
}

export function parseArgs(argv: string[]): SuccessArgs {
  const args: SuccessArgs = { inPath: "", outDir: "", logy: false };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${a} needs a value`);
      return argv[++i];
    };
    if (a === "--in") args.inPath = next();
    else if (a === "--out") args.outDir = next();
    else if (a === "--logy") args.logy = true;
    else throw new Error(`unknown flag ${a}`);
  }
  if (!args.inPath || !args.outDir) throw new Error("--in and --out are required");
  return args;
}

export function toSeries(rows: SummaryRow[]): Series[] {
  const keys = new Map<string, SummaryRow[]>();
  for (const row of rows) {
    const key = `${row.algorithm} @ ${row.threshold}`;
    const bucket = keys.get(key) ?? [];
    bucket.push(row);
    keys.set(key, bucket);
  }
  return [...keys.entries()].sort().map(([label, bucket]) => {
    bucket.sort((a, b) => Number(a.k1) - Number(b.k1));
    return {
      label,
      xs: bucket.map((r) => r.k1),
      ys: bucket.map((r) => r.probability),
    };
  });
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const file = fs.statSync(args.inPath).isDirectory()
    ? path.join(args.inPath, "summary.csv")
    : args.inPath;
  const rows = parseSummary(fs.readFileSync(file, "utf8"), file);
  if (rows.length === 0) {
    console.error(`${file}: summary has no rows`);
    return 1;
  }
  const series = toSeries(rows);
  const name = path.basename(path.dirname(path.resolve(file)));
  const svg = renderFigure(series, {
    title: `${name}: success probability`,
    xLabel: "k1",
    yLabel: "P(relative error < threshold)",
    logy: args.logy,
  });
  fs.mkdirSync(args.outDir, { recursive: true });
  const out = path.join(args.outDir, `${name}-success.svg`);
  fs.writeFileSync(out, svg);
  console.log(`wrote ${out} (${series.length} series)`);
  return 0;
}

if (
  process.argv[1] &&
  import.meta.url === pathToFileURL(process.argv[1]).href
) {
  process.exit(main(process.argv.slice(2)));
}
