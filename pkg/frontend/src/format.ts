/** Display formatting shared by the bars, banner and sparkline legend. */

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export function displayClass(name: string): string {
  return name === "notA" ? "not A" : name;
}

export interface BarSpec {
  label: string;
  text: string;
  fraction: number;
  winner: boolean;
}

export function probabilityBars(classes: string[], probabilities: number[]): BarSpec[] {
  let best = 0;
  probabilities.forEach((p, i) => {
    if (p > probabilities[best]) best = i;
  });
  return classes.map((cls, i) => ({
    label: displayClass(cls),
    text: `${displayClass(cls)} ${formatPercent(probabilities[i])}`,
    fraction: probabilities[i],
    winner: i === best,
  }));
}

export function headline(mode: string, label: string, probabilities: number[], classes: string[]): string {
  const winner = classes.indexOf(label);
  const pct = formatPercent(probabilities[winner] ?? 0);
  if (mode === "two") {
    return label === "A" ? `type A, ${pct}` : `not type A, ${pct}`;
  }
  return `Type ${label}  ${pct}`;
}
