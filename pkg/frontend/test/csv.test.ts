import fs from "fs";
import os from "os";
import path from "path";
import { afterAll, describe, expect, it } from "vitest";

import { CsvError, DEFAULT_LAYOUT, readLayout, readScatter, readSensorMap } from "../src/csv";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "plotreport-csv-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function write(name: string, text: string): string {
  const p = path.join(tmp, name);
  fs.writeFileSync(p, text);
  return p;
}

describe("readScatter", () => {
  it("parses valid rows", () => {
    const p = write(
      "ok.csv",
      "set_id,provenance,mean_beta,mean_trace\ngreedy,greedy,0.65,0.16\nrandom_000,random,0.2,0.5\n"
    );
    const rows = readScatter(p);
    expect(rows).toHaveLength(2);
    expect(rows[0].setId).toBe("greedy");
    expect(rows[1].meanTrace).toBeCloseTo(0.5);
  });

  it("rejects a missing column with line 1", () => {
    const p = write("missing.csv", "set_id,provenance,mean_beta\na,greedy,0.5\n");
    expect(() => readScatter(p)).toThrowError(CsvError);
    try {
      readScatter(p);
    } catch (err) {
      expect((err as CsvError).line).toBe(1);
    }
  });

  it("rejects empty input", () => {
    const p = write("empty.csv", "set_id,provenance,mean_beta,mean_trace\n");
    expect(() => readScatter(p)).toThrow(/no data rows/);
  });

  it("reports the offending line for bad numbers", () => {
    const p = write(
      "badnum.csv",
      "set_id,provenance,mean_beta,mean_trace\na,greedy,0.5,0.2\nb,random,oops,0.3\n"
    );
    try {
      readScatter(p);
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(CsvError);
      expect((err as CsvError).line).toBe(3);
    }
  });

  it("rejects non-positive traces", () => {
    const p = write(
      "badtrace.csv",
      "set_id,provenance,mean_beta,mean_trace\na,greedy,0.5,0\n"
    );
    expect(() => readScatter(p)).toThrow(/mean_trace/);
  });
});

describe("readSensorMap", () => {
  it("parses valid rows", () => {
    const p = write("map.csv", "set_id,provenance,x1,x2\ng,greedy,0.5,0.02\n");
    const rows = readSensorMap(p);
    expect(rows[0].x2).toBeCloseTo(0.02);
  });

  it("rejects positions outside the unit square", () => {
    const p = write("outside.csv", "set_id,provenance,x1,x2\ng,greedy,1.5,0.02\n");
    try {
      readSensorMap(p);
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(CsvError);
      expect((err as CsvError).line).toBe(2);
    }
  });
});

describe("readLayout", () => {
  it("falls back to the default layout", () => {
    expect(readLayout(undefined)).toEqual(DEFAULT_LAYOUT);
  });

  it("reads boundaries from a layout file", () => {
    const p = write("layout.json", JSON.stringify({ subdomain_boundaries: [0.25, 0.75] }));
    const layout = readLayout(p);
    expect(layout.subdomainBoundaries).toEqual([0.25, 0.75]);
    expect(layout.inflowEdge).toBe("bottom");
  });
});
