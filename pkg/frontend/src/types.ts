// Shapes of the JSON documents the exploration service sends and accepts.
// The UI never computes latents; every numeric field here originates
// server-side and is displayed as received.

export interface OperatorInfo {
  kind: string;
  arity: number | string;
  params: Record<string, string> | null;
  doc: string;
}

export interface Catalog {
  operators: OperatorInfo[];
  modes: string[];
  weight_rule: string;
}

export interface ControlDoc {
  ref: string;
  layers?: number[] | null;
}

export interface OperatorDoc {
  kind: string;
  alpha?: number;
  weights?: number[];
  schedule?: unknown;
  block?: number | null;
}

export interface JobDraft {
  version: number;
  backend: string;
  seed: number;
  steps: number;
  mode: string;
  prompts: string[];
  controls: ControlDoc[];
  concept_op: OperatorDoc | null;
  shape_op: OperatorDoc | null;
  weight_cap?: number;
  output_dir?: string | null;
}

/** Merge patch accepted by PUT /sessions/{id}/job. */
export type DraftPatch = Partial<Omit<JobDraft, 'version'>>;

export interface SessionInfo {
  session_id: string;
  draft: JobDraft;
  history: string[];
  created: number;
  updated: number;
}

export interface DraftAck {
  session_id: string;
  draft: JobDraft;
  digest: string;
  predicted_counters: Record<string, number> | null;
}

export interface ResultInfo {
  result_id: string;
  session_id: string;
  status: 'pending' | 'done' | 'failed';
  digest: string;
  latent_digest: string | null;
  counters: Record<string, number> | null;
  timings: Record<string, number> | null;
  error: string | null;
  preview_url: string;
  job: JobDraft;
}

export type Region = 'meaningful' | 'ambiguous' | 'desert';

export interface FieldSampleJson {
  coords: number[];
  region: Region;
  score: number;
}

export interface FieldMapJson {
  version: number;
  axis: string;
  resolution: number;
  scorer_id: string;
  thresholds: number[];
  samples: FieldSampleJson[];
}

export interface ErrorDetail {
  error: string;
  message: string;
  field?: string;
}
