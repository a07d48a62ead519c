/**
 * Minimal deterministic SVG building blocks: scales, axis ticks and the
 * provenance marker shapes.  Rendering is pure string assembly, so identical
 * inputs produce identical files.
 */

export interface LinearScale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as LinearScale;
  scale.domain = domain;
  return scale;
}

export function log10Scale(domain: [number, number], range: [number, number]): LinearScale {
  const inner = linearScale([Math.log10(domain[0]), Math.log10(domain[1])], range);
  const scale = ((value: number) => inner(Math.log10(value))) as LinearScale;
  scale.domain = domain;
  return scale;
}

export function linearTicks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= count) ?? 10 * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-12; v += chosen) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-12); e <= Math.log10(hi) + 1e-12; e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

export function fmt(value: number): string {
  return Number(value.toPrecision(6)).toString();
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export const MARKER_STYLES: Record<string, { label: string; shape: string; color: string }> = {
  greedy: { label: "greedy", shape: "filled-circle", color: "#1b6ca8" },
  greedy_beta2: { label: "greedy (pair criterion)", shape: "half-circle", color: "#1b6ca8" },
  random: { label: "random", shape: "hollow-circle", color: "#888888" },
  random_inflow: { label: "random (inflow-weighted)", shape: "hollow-diamond", color: "#c98a00" },
  chebyshev: { label: "chebyshev reference", shape: "star", color: "#b03030" },
};

const FALLBACK_STYLE = { label: "other", shape: "hollow-circle", color: "#444444" };

export function markerStyle(provenance: string) {
  return MARKER_STYLES[provenance] ?? FALLBACK_STYLE;
}

function starPath(cx: number, cy: number, r: number): string {
  const points: string[] = [];
  for (let i = 0; i < 10; i++) {
    const radius = i % 2 === 0 ? r : 0.42 * r;
    const angle = -Math.PI / 2 + (i * Math.PI) / 5;
    points.push(`${fmt(cx + radius * Math.cos(angle))},${fmt(cy + radius * Math.sin(angle))}`);
  }
  return `M${points.join("L")}Z`;
}

/** One data marker; every marker carries class "marker marker-<provenance>". */
export function marker(provenance: string, cx: number, cy: number, r: number, title?: string): string {
  const style = markerStyle(provenance);
  const cls = `marker marker-${provenance}`;
  const tip = title ? `<title>${escapeXml(title)}</title>` : "";
  const x = fmt(cx);
  const y = fmt(cy);
  switch (style.shape) {
    case "filled-circle":
      return `<circle class="${cls}" cx="${x}" cy="${y}" r="${fmt(r)}" fill="${style.color}" stroke="none">${tip}</circle>`;
    case "half-circle": {
      const half = `M ${fmt(cx - r)} ${y} A ${fmt(r)} ${fmt(r)} 0 0 1 ${fmt(cx + r)} ${y} Z`;
      return (
        `<g class="${cls}">${tip}` +
        `<circle cx="${x}" cy="${y}" r="${fmt(r)}" fill="none" stroke="${style.color}" stroke-width="1.2"/>` +
        `<path d="${half}" fill="${style.color}" stroke="none"/></g>`
      );
    }
    case "hollow-diamond": {
      const d = `M ${x} ${fmt(cy - r)} L ${fmt(cx + r)} ${y} L ${x} ${fmt(cy + r)} L ${fmt(cx - r)} ${y} Z`;
      return `<path class="${cls}" d="${d}" fill="none" stroke="${style.color}" stroke-width="1.2">${tip}</path>`;
    }
    case "star":
      return `<path class="${cls}" d="${starPath(cx, cy, 1.6 * r)}" fill="${style.color}" stroke="none">${tip}</path>`;
    default:
      return `<circle class="${cls}" cx="${x}" cy="${y}" r="${fmt(r)}" fill="none" stroke="${style.color}" stroke-width="1.2">${tip}</circle>`;
  }
}

export function legend(provenances: string[], x: number, y: number): string {
  const parts: string[] = [`<g class="legend" font-size="11" font-family="sans-serif">`];
  provenances.forEach((p, i) => {
    const cy = y + 18 * i;
    parts.push(marker(p, x, cy, 4.5));
    parts.push(`<text x="${fmt(x + 12)}" y="${fmt(cy + 3.5)}">${escapeXml(markerStyle(p).label)}</text>`);
  });
  parts.push("</g>");
  return parts.join("\n");
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}
