import Papa from "papaparse";
import { z } from "zod";

export class SchemaError extends Error {}

export type Row = Record<string, number | null>;

export type PlotKind = "qd-scaling" | "local-law" | "deloc" | "heat-kernel" | "conjecture";

export const PLOT_KINDS: PlotKind[] = ["qd-scaling", "local-law", "deloc", "heat-kernel", "conjecture"];

// numeric cell; blank cells (tau1/tau2/runtime_s in the sweep table) become null
const cell = z
  .string()
  .transform((s) => s.trim())
  .transform((s, ctx) => {
    if (s === "") return null;
    const v = Number(s);
    if (!Number.isFinite(v)) {
      ctx.addIssue({ code: z.ZodIssueCode.custom, message: `not a number: "${s}"` });
      return z.NEVER;
    }
    return v;
  });

// columns each kind actually reads; extra columns pass through untouched
const REQUIRED: Record<PlotKind, string[]> = {
  "qd-scaling": ["N", "W", "eta", "qd_ratio"],
  "local-law": ["N", "local_law_max"],
  deloc: ["seed", "deloc_density"],
  "heat-kernel": ["t", "max_entry", "bound_ratio"],
  conjecture: ["W", "ratio_proved", "ratio_conjectured"],
};

// the sweep table and the per-seed deloc table spell this column
// differently; accept both and normalize to the sweep name
const ALIASES: Record<string, string[]> = {
  deloc_density: ["density"],
};

function hasColumn(header: string[], col: string): boolean {
  return [col, ...(ALIASES[col] ?? [])].some((name) => header.includes(name));
}

export function requiredColumns(kind: PlotKind): string[] {
  return REQUIRED[kind];
}

export function parseTable(csvText: string, kind: PlotKind): Row[] {
  const parsed = Papa.parse<Record<string, string>>(csvText.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`malformed CSV: ${e.message} (row ${e.row ?? "?"})`);
  }
  const header = parsed.meta.fields ?? [];
  for (const col of REQUIRED[kind]) {
    if (!hasColumn(header, col)) {
      throw new SchemaError(`missing column: ${col}`);
    }
  }
  if (parsed.data.length === 0) {
    throw new SchemaError("no data rows");
  }
  return parsed.data.map((raw, i) => {
    const row: Row = {};
    for (const col of header) {
      const out = cell.safeParse(raw[col] ?? "");
      if (!out.success) {
        throw new SchemaError(`column ${col}, row ${i + 1}: ${out.error.issues[0].message}`);
      }
      row[col] = out.data;
    }
    for (const col of REQUIRED[kind]) {
      if (row[col] === undefined) {
        for (const alt of ALIASES[col] ?? []) {
          const v = row[alt];
          if (v !== undefined) {
            row[col] = v;
            break;
          }
        }
      }
      if (row[col] === null) {
        throw new SchemaError(`column ${col}, row ${i + 1}: value required`);
      }
    }
    return row;
  });
}

export function numbers(rows: Row[], col: string): number[] {
  return rows.map((r) => {
    const v = r[col];
    if (v === null || v === undefined) throw new SchemaError(`missing column: ${col}`);
    return v;
  });
}
