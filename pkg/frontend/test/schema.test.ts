import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { parseTable, requiredColumns, SchemaError } from "../src/schema.js";

const SWEEP = readFileSync(new URL("../fixtures/real_sweep.csv", import.meta.url), "utf8");

describe("parseTable", () => {
  it("reads the sweep fixture with typed cells and null blanks", () => {
    const rows = parseTable(SWEEP, "qd-scaling");
    expect(rows.length).toBe(9);
    expect(rows[0].N).toBe(48);
    expect(rows[0].qd_ratio).toBeGreaterThan(0);
    expect(rows[0].runtime_s).toBeNull();
    expect(rows[0].tau1).toBeNull();
  });

  it("names the missing column", () => {
    const noQd = SWEEP.replace("qd_ratio", "qd_ratio_x");
    expect(() => parseTable(noQd, "qd-scaling")).toThrowError(/missing column: qd_ratio/);
    const noN = ["W,qd_ratio,eta", "8,0.5,0.1"].join("\n");
    expect(() => parseTable(noN, "qd-scaling")).toThrowError(/missing column: N/);
  });

  it("rejects a header-only table", () => {
    const headerOnly = SWEEP.split("\n")[0];
    expect(() => parseTable(headerOnly, "qd-scaling")).toThrowError(/no data rows/);
  });

  it("rejects non-numeric cells and blank required cells", () => {
    const bad = ["N,W,eta,qd_ratio", "64,8,0.1,banana"].join("\n");
    expect(() => parseTable(bad, "qd-scaling")).toThrowError(SchemaError);
    const blank = ["N,W,eta,qd_ratio", "64,8,0.1,"].join("\n");
    expect(() => parseTable(blank, "qd-scaling")).toThrowError(/qd_ratio.*required/);
  });

  it("rejects ragged rows as malformed", () => {
    const ragged = ["N,W,eta,qd_ratio", "64,8,0.1,0.5,99,extra"].join("\n");
    expect(() => parseTable(ragged, "qd-scaling")).toThrowError(/malformed CSV/);
  });

  it("kind selects its own required columns", () => {
    expect(requiredColumns("local-law")).toContain("local_law_max");
    expect(requiredColumns("heat-kernel")).toContain("bound_ratio");
    const probe = ["W,ratio_proved,ratio_conjectured", "8,0.2,1.1"].join("\n");
    expect(parseTable(probe, "conjecture").length).toBe(1);
    expect(() => parseTable(probe, "qd-scaling")).toThrowError(/missing column/);
  });
});
