/** Reader for bench summary CSVs (success counts per threshold). */

export const SUMMARY_HEADER =
  "algorithm,k1,threshold,successes,trials,probability";

export interface SummaryRow {
  algorithm: string;
  k1: string;
  threshold: string;
  successes: string;
  trials: string;
  probability: string;
}

export function parseSummary(text: string, path = "<memory>"): SummaryRow[] {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== SUMMARY_HEADER) {
    throw new Error(`${path}: not a summary file`);
  }
  return lines.slice(1).map((line, idx) => {
    const parts = line.split(",");
    if (parts.length !== 6) {
      throw new Error(`${path}: row ${idx + 2} has ${parts.length} cells`);
    }
    const [algorithm, k1, threshold, successes, trials, probability] = parts;
    return { algorithm, k1, threshold, successes, trials, probability };
  });
}
