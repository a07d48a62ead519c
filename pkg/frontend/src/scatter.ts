/**
 * Scatter figure: mean posterior-covariance trace (log axis) against the mean
 * observability coefficient, one marker per sensor set.
 */

import { ScatterRow } from "./csv";
import {
  decadeTicks,
  escapeXml,
  fmt,
  legend,
  linearScale,
  linearTicks,
  log10Scale,
  marker,
  svgDocument,
} from "./svg";

const WIDTH = 660;
const HEIGHT = 480;
const MARGIN = { left: 64, right: 170, top: 24, bottom: 52 };

export function renderScatter(rows: ScatterRow[]): string {
  const betas = rows.map((r) => r.meanBeta);
  const traces = rows.map((r) => r.meanTrace);
  const xMax = Math.max(...betas) * 1.05 || 1;
  const yLo = Math.pow(10, Math.floor(Math.log10(Math.min(...traces))));
  const yHi = Math.pow(10, Math.ceil(Math.log10(Math.max(...traces))));

  const x = linearScale([0, xMax], [MARGIN.left, WIDTH - MARGIN.right]);
  const y = log10Scale([yLo, yHi], [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const parts: string[] = [];
  const axisColor = "#222222";
  const plotBottom = HEIGHT - MARGIN.bottom;

  parts.push(`<g class="axes" stroke="${axisColor}" stroke-width="1">`);
  parts.push(`<line x1="${MARGIN.left}" y1="${plotBottom}" x2="${WIDTH - MARGIN.right}" y2="${plotBottom}"/>`);
  parts.push(`<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${plotBottom}"/>`);
  parts.push("</g>");

  parts.push(`<g class="ticks" font-size="11" font-family="sans-serif" fill="${axisColor}">`);
  for (const t of linearTicks(0, xMax)) {
    const px = x(t);
    parts.push(`<line x1="${fmt(px)}" y1="${plotBottom}" x2="${fmt(px)}" y2="${plotBottom + 5}" stroke="${axisColor}"/>`);
    parts.push(`<text x="${fmt(px)}" y="${plotBottom + 18}" text-anchor="middle">${fmt(t)}</text>`);
  }
  for (const t of decadeTicks(yLo, yHi)) {
    const py = y(t);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${fmt(py)}" x2="${MARGIN.left}" y2="${fmt(py)}" stroke="${axisColor}"/>`);
    parts.push(`<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${WIDTH - MARGIN.right}" y2="${fmt(py)}" stroke="#dddddd"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(py + 3.5)}" text-anchor="end">${fmt(t)}</text>`);
  }
  parts.push("</g>");

  parts.push(
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 14}" text-anchor="middle" ` +
      `font-size="13" font-family="sans-serif">mean observability coefficient</text>`
  );
  parts.push(
    `<text x="18" y="${(MARGIN.top + plotBottom) / 2}" text-anchor="middle" font-size="13" ` +
      `font-family="sans-serif" transform="rotate(-90 18 ${(MARGIN.top + plotBottom) / 2})">` +
      `mean posterior covariance trace</text>`
  );

  parts.push(`<g class="data">`);
  for (const row of rows) {
    parts.push(marker(row.provenance, x(row.meanBeta), y(row.meanTrace), 4.5, escapeXml(row.setId)));
  }
  parts.push("</g>");

  const seen = [...new Set(rows.map((r) => r.provenance))];
  parts.push(legend(seen, WIDTH - MARGIN.right + 24, MARGIN.top + 12));

  return svgDocument(WIDTH, HEIGHT, parts.join("\n"));
}
