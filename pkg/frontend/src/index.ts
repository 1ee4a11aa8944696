export { render, PlotJob } from "./render.js";
export { parseTable, requiredColumns, SchemaError, PLOT_KINDS, PlotKind, Row } from "./schema.js";
export { fitLogLog, geometricMean, LogFit } from "./fit.js";
