/**
 * Linear and logarithmic axis scales with deterministic tick placement.
 */

export interface Scale {
  domain: [number, number];
  range: [number, number];
  map(value: number): number;
  ticks(): number[];
}

function niceStep(span: number, target: number): number {
  const raw = span / target;
  const power = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const mult of [1, 2, 5, 10]) {
    if (mult * power >= raw) return mult * power;
  }
  return 10 * power;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const span = d1 - d0 || 1;
  return {
    domain,
    range,
    map: (v) => range[0] + ((v - d0) / span) * (range[1] - range[0]),
    ticks: () => {
      const step = niceStep(span, 6);
      const first = Math.ceil(d0 / step) * step;
      const out: number[] = [];
      for (let t = first; t <= d1 + 1e-12 * Math.abs(step); t += step) {
        out.push(Number(t.toPrecision(12)));
      }
      return out;
    },
  };
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) {
    throw new Error(`log scale needs a positive domain, got [${d0}, ${d1}]`);
  }
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const span = l1 - l0 || 1;
  return {
    domain,
    range,
    map: (v) => range[0] + ((Math.log10(v) - l0) / span) * (range[1] - range[0]),
    ticks: () => {
      const out: number[] = [];
      for (let p = Math.ceil(l0 - 1e-12); p <= Math.floor(l1 + 1e-12); p += 1) {
        out.push(Number(Math.pow(10, p).toPrecision(12)));
      }
      return out.length >= 2 ? out : [d0, d1];
    },
  };
}

/** Finite-value extent of several arrays, padded a little. */
export function extent(values: number[][], log: boolean): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (!Number.isFinite(v)) continue;
      if (log && v <= 0) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!Number.isFinite(lo)) {
    throw new Error("no finite values to plot");
  }
  if (lo === hi) {
    const pad = lo === 0 ? 1 : Math.abs(lo) * 0.1;
    return [lo - pad, hi + pad];
  }
  if (log) {
    return [lo / 1.2, hi * 1.2];
  }
  const pad = (hi - lo) * 0.05;
  return [lo - pad, hi + pad];
}
