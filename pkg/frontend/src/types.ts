// Wire types of the surrogate service.

export interface Meta {
  n: number;
  r: number;
  d_lambda: number;
  parameter_names: string[];
  t_range: [number, number];
  param_ranges: [number, number][];
  input_ranges: [number, number][];
  energy_threshold: number;
  e: number;
  e_k: number[];
  grid_side?: number;
}

export interface InferQuery {
  t: number;
  lambda: number[];
}

export interface FieldResult {
  field: Float64Array;
  latencyUs: number;
  extrapolated: boolean;
}
