/**
 * Sensor map: selected centers drawn over the unit square with the
 * subdomain boundaries and the inflow edge highlighted.
 */

import { Layout, SensorMapRow } from "./csv";
import { escapeXml, fmt, legend, linearScale, marker, svgDocument } from "./svg";

const WIDTH = 640;
const HEIGHT = 500;
const MARGIN = { left: 56, right: 170, top: 24, bottom: 46 };

export function renderSensorMap(rows: SensorMapRow[], layout: Layout): string {
  const [x0, x1, y0, y1] = layout.domain;
  const side = Math.min(WIDTH - MARGIN.left - MARGIN.right, HEIGHT - MARGIN.top - MARGIN.bottom);
  const sx = linearScale([x0, x1], [MARGIN.left, MARGIN.left + side]);
  const sy = linearScale([y0, y1], [MARGIN.top + side, MARGIN.top]); // flip: y grows upward

  const parts: string[] = [];
  parts.push(
    `<rect class="domain" x="${fmt(sx(x0))}" y="${fmt(sy(y1))}" width="${fmt(sx(x1) - sx(x0))}" ` +
      `height="${fmt(sy(y0) - sy(y1))}" fill="#fbfbfb" stroke="#222222" stroke-width="1"/>`
  );

  for (const b of layout.subdomainBoundaries) {
    parts.push(
      `<line class="subdomain-boundary" x1="${fmt(sx(x0))}" y1="${fmt(sy(b))}" ` +
        `x2="${fmt(sx(x1))}" y2="${fmt(sy(b))}" stroke="#555555" stroke-width="1" stroke-dasharray="6 4"/>`
    );
  }

  // inflow edge (heat flux enters here)
  const edgeY = layout.inflowEdge === "top" ? sy(y1) : sy(y0);
  parts.push(
    `<line class="inflow-edge" x1="${fmt(sx(x0))}" y1="${fmt(edgeY)}" x2="${fmt(sx(x1))}" ` +
      `y2="${fmt(edgeY)}" stroke="#b03030" stroke-width="4"/>`
  );
  parts.push(
    `<text x="${fmt((sx(x0) + sx(x1)) / 2)}" y="${fmt(edgeY + 22)}" text-anchor="middle" ` +
      `font-size="12" font-family="sans-serif" fill="#b03030">inflow edge</text>`
  );

  parts.push(`<g class="data">`);
  for (const row of rows) {
    parts.push(marker(row.provenance, sx(row.x1), sy(row.x2), 4.0, escapeXml(row.setId)));
  }
  parts.push("</g>");

  const seen = [...new Set(rows.map((r) => r.provenance))];
  parts.push(legend(seen, MARGIN.left + side + 28, MARGIN.top + 12));

  return svgDocument(WIDTH, HEIGHT, parts.join("\n"));
}
