/**
 * SVG rendering of the four figure kinds.
 *
 * The renderer only maps numbers through the declared axis scales; it never
 * mutates or rewrites its input tables.  Output is a deterministic function
 * of the recipe and the CSV contents.
 */

import { CsvTable, numericColumn } from "./csv.js";
import { FigureRecipe, SeriesSpec } from "./recipe.js";
import { Scale, extent, linearScale, logScale } from "./scale.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MARGIN = { left: 64, right: 16, top: 36, bottom: 48 };

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface LoadedSeries {
  spec: SeriesSpec;
  x: number[];
  y: number[];
  yErr?: number[];
}

function loadSeries(spec: SeriesSpec, tables: Map<string, CsvTable>): LoadedSeries {
  const table = tables.get(spec.csv);
  if (table === undefined) {
    throw new Error(`no table loaded for ${spec.csv}`);
  }
  return {
    spec,
    x: numericColumn(table, spec.x),
    y: numericColumn(table, spec.y),
    yErr: spec.yErr ? numericColumn(table, spec.yErr) : undefined,
  };
}

function sortedByX(s: LoadedSeries): LoadedSeries {
  const order = s.x.map((_, i) => i).sort((a, b) => s.x[a] - s.x[b]);
  return {
    spec: s.spec,
    x: order.map((i) => s.x[i]),
    y: order.map((i) => s.y[i]),
    yErr: s.yErr ? order.map((i) => s.yErr![i]) : undefined,
  };
}

function axisPath(sx: Scale, sy: Scale): string {
  const [x0, x1] = sx.range;
  const [y0, y1] = sy.range;
  return `M ${fmt(x0)} ${fmt(y1)} L ${fmt(x0)} ${fmt(y0)} L ${fmt(x1)} ${fmt(y0)}`;
}

function tickMarks(sx: Scale, sy: Scale): string {
  const parts: string[] = [];
  const y0 = sy.range[0];
  for (const t of sx.ticks()) {
    const px = sx.map(t);
    parts.push(`<line x1="${fmt(px)}" y1="${fmt(y0)}" x2="${fmt(px)}" y2="${fmt(y0 + 5)}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(px)}" y="${fmt(y0 + 18)}" text-anchor="middle" font-size="11">${fmt(t)}</text>`);
  }
  const x0 = sx.range[0];
  for (const t of sy.ticks()) {
    const py = sy.map(t);
    parts.push(`<line x1="${fmt(x0 - 5)}" y1="${fmt(py)}" x2="${fmt(x0)}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(x0 - 8)}" y="${fmt(py + 4)}" text-anchor="end" font-size="11">${fmt(t)}</text>`);
  }
  return parts.join("\n");
}

function polyline(s: LoadedSeries, sx: Scale, sy: Scale, color: string, width = 1.5): string {
  const pts = s.x
    .map((x, i) => ({ x, y: s.y[i] }))
    .filter((p) => Number.isFinite(p.x) && Number.isFinite(p.y))
    .map((p) => `${fmt(sx.map(p.x))},${fmt(sy.map(p.y))}`)
    .join(" ");
  return `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="${width}"/>`;
}

function points(s: LoadedSeries, sx: Scale, sy: Scale, color: string): string {
  const parts: string[] = [];
  for (let i = 0; i < s.x.length; i += 1) {
    if (!Number.isFinite(s.x[i]) || !Number.isFinite(s.y[i])) continue;
    const px = sx.map(s.x[i]);
    const py = sy.map(s.y[i]);
    if (s.yErr !== undefined && Number.isFinite(s.yErr[i]) && s.yErr[i] > 0) {
      const lo = sy.map(s.y[i] - s.yErr[i]);
      const hi = sy.map(s.y[i] + s.yErr[i]);
      parts.push(`<line x1="${fmt(px)}" y1="${fmt(lo)}" x2="${fmt(px)}" y2="${fmt(hi)}" stroke="${color}" stroke-width="1"/>`);
    }
    parts.push(`<circle cx="${fmt(px)}" cy="${fmt(py)}" r="3" fill="${color}"/>`);
  }
  return parts.join("\n");
}

function legend(entries: { label: string; color: string }[], x: number, y: number): string {
  return entries
    .map((e, i) =>
      `<rect x="${fmt(x)}" y="${fmt(y + 16 * i - 8)}" width="10" height="10" fill="${e.color}"/>` +
      `<text x="${fmt(x + 14)}" y="${fmt(y + 16 * i + 1)}" font-size="11">${esc(e.label)}</text>`)
    .join("\n");
}

/** Render a recipe against preloaded tables; returns the SVG document. */
export function renderFigure(recipe: FigureRecipe, tables: Map<string, CsvTable>): string {
  const loaded = recipe.series.map((s) => sortedByX(loadSeries(s, tables)));
  const ref = recipe.reference ? sortedByX(loadSeries(recipe.reference, tables)) : undefined;
  const all = ref ? [...loaded, ref] : loaded;

  const width = recipe.width!;
  const height = recipe.height!;
  const xDomain = extent(all.map((s) => s.x), Boolean(recipe.logX));
  const yValues = all.map((s) =>
    s.yErr ? s.y.flatMap((v, i) => [v - s.yErr![i], v + s.yErr![i]]) : s.y);
  const yDomain = extent(yValues, Boolean(recipe.logY));
  const make = (log: boolean | undefined, domain: [number, number], range: [number, number]) =>
    log ? logScale(domain, range) : linearScale(domain, range);
  const sx = make(recipe.logX, xDomain, [MARGIN.left, width - MARGIN.right]);
  const sy = make(recipe.logY, yDomain, [height - MARGIN.bottom, MARGIN.top]);

  const body: string[] = [];
  body.push(`<path d="${axisPath(sx, sy)}" fill="none" stroke="#333" stroke-width="1"/>`);
  body.push(tickMarks(sx, sy));
  if (ref !== undefined) {
    body.push(polyline(ref, sx, sy, "#000000", 1.5));
  }
  const legendEntries: { label: string; color: string }[] = [];
  loaded.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    if (recipe.kind === "trace") {
      body.push(polyline(s, sx, sy, color, 1.0));
    } else {
      body.push(points(s, sx, sy, color));
    }
    legendEntries.push({ label: s.spec.label ?? `${s.spec.csv}:${s.spec.y}`, color });
  });
  if (ref !== undefined) {
    legendEntries.push({ label: ref.spec.label ?? "reference", color: "#000000" });
  }
  body.push(legend(legendEntries, width - MARGIN.right - 170, MARGIN.top + 8));

  if (recipe.title) {
    body.push(`<text x="${fmt(width / 2)}" y="20" text-anchor="middle" font-size="14">${esc(recipe.title)}</text>`);
  }
  if (recipe.xLabel) {
    body.push(`<text x="${fmt((MARGIN.left + width - MARGIN.right) / 2)}" y="${fmt(height - 10)}" text-anchor="middle" font-size="12">${esc(recipe.xLabel)}</text>`);
  }
  if (recipe.yLabel) {
    const cy = (MARGIN.top + height - MARGIN.bottom) / 2;
    body.push(`<text x="16" y="${fmt(cy)}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${fmt(cy)})">${esc(recipe.yLabel)}</text>`);
  }

  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="#ffffff"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}
