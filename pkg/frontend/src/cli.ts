#!/usr/bin/env node
/**
 * plot_report: render experiment CSVs to SVG/PNG figures.
 *
 *   plot_report scatter --in scatter.csv --out scatter.svg
 *   plot_report map --in sensor_map.csv --out map.png [--layout layout.json]
 *
 * The output format follows the --out extension (.svg or .png); --format
 * overrides it.  Exit codes: 0 success, 1 schema or render failure, 2 usage.
 */

import fs from "fs";
import path from "path";
import { parseArgs } from "util";

import { CsvError, readLayout, readScatter, readSensorMap } from "./csv";
import { renderSensorMap } from "./map";
import { renderScatter } from "./scatter";

const USAGE =
  "usage: plot_report scatter|map --in PATH --out PATH [--layout PATH] [--format svg|png]";

function writeImage(svg: string, outPath: string, format: string): void {
  if (format === "svg") {
    fs.writeFileSync(outPath, svg);
    return;
  }
  // PNG goes through a rasterizer; loaded lazily so SVG-only use never needs it
  const { Resvg } = require("@resvg/resvg-js");
  const png = new Resvg(svg, { fitTo: { mode: "zoom" as const, value: 2 } }).render().asPng();
  fs.writeFileSync(outPath, png);
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: "string" },
        out: { type: "string" },
        layout: { type: "string" },
        format: { type: "string" },
      },
    });
  } catch (err) {
    console.error(String(err));
    console.error(USAGE);
    return 2;
  }

  const command = args.positionals[0];
  const inPath = args.values.in;
  const outPath = args.values.out;
  if (!command || !["scatter", "map"].includes(command) || !inPath || !outPath) {
    console.error(USAGE);
    return 2;
  }
  const format = args.values.format ?? (path.extname(outPath).toLowerCase() === ".png" ? "png" : "svg");
  if (!["svg", "png"].includes(format)) {
    console.error(`unknown format '${format}'`);
    return 2;
  }

  try {
    let svg: string;
    if (command === "scatter") {
      const rows = readScatter(inPath);
      svg = renderScatter(rows);
      console.log(`scatter: ${rows.length} sensor sets`);
    } else {
      const rows = readSensorMap(inPath);
      svg = renderSensorMap(rows, readLayout(args.values.layout));
      console.log(`map: ${rows.length} sensor positions`);
    }
    writeImage(svg, outPath, format);
    console.log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    }
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
