/**
 * Minimal static SVG line charts.
 *
 * Each series keeps its verbatim cell strings and the renderer embeds
 * them in data-x / data-y attributes of the series group, so the file
 * itself certifies what was plotted. Geometry is derived from the same
 * strings; unparseable or empty cells get no vertex but stay in the
 * embedded payload.
 */

export const LOG_CLAMP = 1e-16;

export interface Series {
  label: string;
  xs: string[];
  ys: string[];
}

export interface FigureOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  logy?: boolean;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");

function parseCell(s: string): number | null {
  if (s === "") return null;
  const v = Number(s);
  return Number.isFinite(v) ? v : null;
}

function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / (n * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const out: number[] = [];
  for (let t = Math.ceil(lo / s) * s; t <= hi + 1e-12 * span; t += s) out.push(t);
  return out;
}

function fmtTick(v: number, logy: boolean): string {
  if (logy) return `1e${Math.round(v)}`;
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e4 || a < 1e-3)) return v.toExponential(0);
  return String(Number(v.toPrecision(6)));
}

export function renderFigure(series: Series[], opts: FigureOptions): string {
  const width = opts.width ?? 720;
  const height = opts.height ?? 460;
  const logy = opts.logy ?? false;
  const m = { left: 64, right: 160, top: 40, bottom: 48 };
  const plotW = width - m.left - m.right;
  const plotH = height - m.top - m.bottom;

  // collect plottable vertices in data space
  let clamped = false;
  const pts = series.map((s) => {
    const out: { x: number; y: number }[] = [];
    const n = Math.min(s.xs.length, s.ys.length);
    for (let i = 0; i < n; i++) {
      const x = parseCell(s.xs[i]);
      let y = parseCell(s.ys[i]);
      if (x === null || y === null) continue;
      if (logy) {
        if (y < LOG_CLAMP) {
          y = LOG_CLAMP;
          clamped = true;
        }
        y = Math.log10(y);
      }
      out.push({ x, y });
    }
    return out;
  });

  const all = pts.flat();
  let xLo = Infinity, xHi = -Infinity, yLo = Infinity, yHi = -Infinity;
  for (const p of all) {
    xLo = Math.min(xLo, p.x); xHi = Math.max(xHi, p.x);
    yLo = Math.min(yLo, p.y); yHi = Math.max(yHi, p.y);
  }
  if (all.length === 0) { xLo = 0; xHi = 1; yLo = 0; yHi = 1; }
  if (xHi === xLo) xHi = xLo + 1;
  if (yHi === yLo) yHi = yLo + 1;
  const sx = (x: number) => m.left + ((x - xLo) / (xHi - xLo)) * plotW;
  const sy = (y: number) => m.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${m.left}" y="22" font-size="15" font-weight="bold">` +
      `${esc(opts.title)}</text>`,
  );

  // axes and grid
  parts.push(
    `<rect x="${m.left}" y="${m.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#333"/>`,
  );
  for (const t of ticks(xLo, xHi)) {
    const X = sx(t);
    parts.push(`<line x1="${X}" y1="${m.top}" x2="${X}" y2="${m.top + plotH}" stroke="#ddd"/>`);
    parts.push(
      `<text x="${X}" y="${m.top + plotH + 16}" text-anchor="middle">` +
        `${fmtTick(t, false)}</text>`,
    );
  }
  for (const t of ticks(yLo, yHi)) {
    const Y = sy(t);
    parts.push(`<line x1="${m.left}" y1="${Y}" x2="${m.left + plotW}" y2="${Y}" stroke="#ddd"/>`);
    parts.push(
      `<text x="${m.left - 6}" y="${Y + 4}" text-anchor="end">` +
        `${fmtTick(t, logy)}</text>`,
    );
  }
  parts.push(
    `<text x="${m.left + plotW / 2}" y="${height - 10}" text-anchor="middle">` +
      `${esc(opts.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${m.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${m.top + plotH / 2})">` +
      `${esc(logy ? `log10 ${opts.yLabel}` : opts.yLabel)}</text>`,
  );

  // series, verbatim payload on the group element
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const line = pts[i]
      .map((p) => `${sx(p.x).toFixed(2)},${sy(p.y).toFixed(2)}`)
      .join(" ");
    parts.push(
      `<g class="series" data-label="${esc(s.label)}" ` +
        `data-x="${esc(s.xs.join(";"))}" data-y="${esc(s.ys.join(";"))}">`,
    );
    parts.push(
      `<polyline points="${line}" fill="none" stroke="${color}" stroke-width="1.5"/>`,
    );
    parts.push(`</g>`);
    const ly = m.top + 14 + i * 18;
    parts.push(
      `<line x1="${m.left + plotW + 10}" y1="${ly - 4}" x2="${m.left + plotW + 34}" ` +
        `y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(`<text x="${m.left + plotW + 40}" y="${ly}">${esc(s.label)}</text>`);
  });

  if (logy && clamped) {
    parts.push(
      `<text x="${m.left}" y="${height - 28}" font-size="10" fill="#666" ` +
        `class="clamp-note">log axis: values below 1e-16 clamped to 1e-16</text>`,
    );
  }
  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}

/** pull the embedded payloads back out of a rendered figure */
export function extractSeries(svg: string): Series[] {
  const out: Series[] = [];
  const re =
    /<g class="series" data-label="([^"]*)" data-x="([^"]*)" data-y="([^"]*)">/g;
  const unesc = (s: string) =>
    s.replace(/&quot;/g, '"').replace(/&lt;/g, "<").replace(/&amp;/g, "&");
  let match: RegExpExecArray | null;
  while ((match = re.exec(svg)) !== null) {
    out.push({
      label: unesc(match[1]),
      xs: unesc(match[2]).split(";"),
      ys: unesc(match[3]).split(";"),
    });
  }
  return out;
}
