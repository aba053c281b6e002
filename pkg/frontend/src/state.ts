// Explorer state: everything the widgets render from.

import type { FieldResult, InferQuery, Meta } from "./types.js";

export type View = { kind: "field" } | { kind: "mode"; k: number };

export interface ColorScale {
  limit: number; // symmetric: values map over [-limit, +limit]
  pinned: boolean;
}

/**
 * Slider travel for a training range [lo, hi]: the training span extended
 * by half a span on each side. The outer halves are the extrapolation
 * zone. A collapsed range (lo == hi) still gets usable travel.
 */
export function sliderRange(lo: number, hi: number): [number, number] {
  let pad = (hi - lo) / 2;
  if (pad === 0) pad = Math.max(Math.abs(lo) / 2, 0.5);
  return [lo - pad, hi + pad];
}

export class ExplorerState {
  t: number;
  lambda: number[];
  playing = false;
  view: View = { kind: "field" };
  scale: ColorScale = { limit: 1, pinned: false };
  lastLatencyUs = 0;
  extrapolated = false;
  field: Float64Array | null = null;

  constructor(readonly meta: Meta) {
    const [t0, t1] = meta.t_range;
    this.t = (t0 + t1) / 2;
    this.lambda = meta.param_ranges.map(([lo, hi]) => (lo + hi) / 2);
  }

  query(): InferQuery {
    return { t: this.t, lambda: [...this.lambda] };
  }

  /** Fold a completed inference into the display state. */
  applyResult(query: InferQuery, result: FieldResult): void {
    this.t = query.t;
    this.lambda = [...query.lambda];
    this.field = result.field;
    this.lastLatencyUs = result.latencyUs;
    this.extrapolated = result.extrapolated;
    if (!this.scale.pinned) {
      this.scale.limit = symmetricLimit(result.field);
    }
  }
}

/** Largest magnitude in the field; 1 for an all-zero field so 0 maps mid-scale. */
export function symmetricLimit(field: ArrayLike<number>): number {
  let m = 0;
  for (let i = 0; i < field.length; i++) {
    const a = Math.abs(field[i]);
    if (a > m) m = a;
  }
  return m === 0 ? 1 : m;
}

export function sameQuery(a: InferQuery, b: InferQuery): boolean {
  if (a.t !== b.t || a.lambda.length !== b.lambda.length) return false;
  for (let i = 0; i < a.lambda.length; i++) {
    if (a.lambda[i] !== b.lambda[i]) return false;
  }
  return true;
}
