/**
 * Figure recipes: which CSVs to read, which columns to plot, and how.
 */

export const FIGURE_KINDS = [
  "analytic_overlay",
  "trace",
  "iat_curve",
  "correlation_loglog",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface SeriesSpec {
  csv: string;
  x: string;
  y: string;
  yErr?: string;
  label?: string;
}

export interface FigureRecipe {
  kind: FigureKind;
  output: string;
  series: SeriesSpec[];
  reference?: SeriesSpec;
  title?: string;
  xLabel?: string;
  yLabel?: string;
  logX?: boolean;
  logY?: boolean;
  width?: number;
  height?: number;
}

function asSeries(value: unknown, where: string): SeriesSpec {
  if (typeof value !== "object" || value === null) {
    throw new Error(`${where}: expected an object`);
  }
  const v = value as Record<string, unknown>;
  for (const key of ["csv", "x", "y"]) {
    if (typeof v[key] !== "string" || v[key] === "") {
      throw new Error(`${where}.${key}: required string`);
    }
  }
  for (const key of ["yErr", "label"]) {
    if (v[key] !== undefined && typeof v[key] !== "string") {
      throw new Error(`${where}.${key}: must be a string when present`);
    }
  }
  return v as unknown as SeriesSpec;
}

/** Validate a parsed recipe JSON document. */
export function parseRecipe(doc: unknown): FigureRecipe {
  if (typeof doc !== "object" || doc === null) {
    throw new Error("recipe must be a JSON object");
  }
  const v = doc as Record<string, unknown>;
  if (!FIGURE_KINDS.includes(v.kind as FigureKind)) {
    throw new Error(`kind must be one of ${FIGURE_KINDS.join(", ")}; got ${String(v.kind)}`);
  }
  if (typeof v.output !== "string" || v.output === "") {
    throw new Error("output: required string path");
  }
  if (!Array.isArray(v.series) || v.series.length === 0) {
    throw new Error("series: need at least one entry");
  }
  const series = v.series.map((s, i) => asSeries(s, `series[${i}]`));
  const reference = v.reference === undefined ? undefined : asSeries(v.reference, "reference");
  const kind = v.kind as FigureKind;
  return {
    kind,
    output: v.output,
    series,
    reference,
    title: typeof v.title === "string" ? v.title : undefined,
    xLabel: typeof v.xLabel === "string" ? v.xLabel : undefined,
    yLabel: typeof v.yLabel === "string" ? v.yLabel : undefined,
    logX: Boolean(v.logX) || kind === "correlation_loglog",
    logY: Boolean(v.logY) || kind === "correlation_loglog" || kind === "iat_curve",
    width: typeof v.width === "number" ? v.width : 640,
    height: typeof v.height === "number" ? v.height : 420,
  };
}
