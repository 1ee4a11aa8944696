#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { render } from "./render.js";
import { PLOT_KINDS, PlotKind, SchemaError } from "./schema.js";

export function runPlot(kind: PlotKind, inPath: string, outPath: string, logX?: boolean, logY?: boolean): void {
  let csvText: string;
  try {
    csvText = readFileSync(inPath, "utf8");
  } catch {
    throw new SchemaError(`cannot read ${inPath}`);
  }
  const svg = render({ kind, csvText, logX, logY });
  writeFileSync(outPath, svg);
}

export function main(argv: string[]): number {
  let failed = false;
  const parser = yargs(argv)
    .scriptName("plots")
    .command(
      "$0 <kind>",
      "render one figure from a results CSV",
      (y) =>
        y
          .positional("kind", { choices: PLOT_KINDS, demandOption: true })
          .option("in", { type: "string", demandOption: true, describe: "input CSV" })
          .option("out", { type: "string", demandOption: true, describe: "output SVG" })
          .option("log-x", { type: "boolean", describe: "force log/linear x axis" })
          .option("log-y", { type: "boolean", describe: "force log/linear y axis" }),
      (args) => {
        try {
          runPlot(args.kind as PlotKind, args.in, args.out, args["log-x"], args["log-y"]);
          console.log(`wrote ${args.out}`);
        } catch (e) {
          failed = true;
          console.error(e instanceof SchemaError ? `schema error: ${e.message}` : String(e));
        }
      },
    )
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      failed = true;
      console.error(msg ?? String(err));
    });
  parser.parseSync();
  return failed ? 1 : 0;
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js");
if (invokedDirectly) {
  process.exit(main(hideBin(process.argv)));
}
