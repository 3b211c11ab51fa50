/**
 * Entry point: render one recipe file.
 *
 *   node dist/cli.js path/to/recipe.json
 *
 * CSV paths inside the recipe resolve relative to the recipe file.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

import { parseCsv } from "./csv.js";
import { parseRecipe } from "./recipe.js";
import { renderFigure } from "./render.js";

export function runRecipeFile(recipePath: string): string {
  const recipe = parseRecipe(JSON.parse(readFileSync(recipePath, "utf8")));
  const base = dirname(resolve(recipePath));
  const tables = new Map(
    [...recipe.series, ...(recipe.reference ? [recipe.reference] : [])].map((s) => [
      s.csv,
      parseCsv(readFileSync(resolve(base, s.csv), "utf8")),
    ]),
  );
  const svg = renderFigure(recipe, tables);
  const outPath = resolve(base, recipe.output);
  writeFileSync(outPath, svg);
  return outPath;
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");

if (invokedDirectly) {
  const recipePath = process.argv[2];
  if (!recipePath) {
    console.error("usage: render-figure <recipe.json>");
    process.exit(2);
  }
  try {
    console.log(`wrote ${runRecipeFile(recipePath)}`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
