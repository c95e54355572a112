import { describe, expect, it } from 'vitest';

import type { RecordedRequest } from '../src/api.js';
import { isAffine } from '../src/weights.js';
import type { Catalog, DraftPatch, ResultInfo, SessionInfo } from '../src/types.js';
import { expectedSequence, fixtureJson } from './helpers.js';

// Contract tests: the recorded fixtures are the agreement between this
// client and the service. Every request body the UI can emit must satisfy
// the draft schema rules; every recorded response must carry the fields
// the views read.

const DRAFT_KEYS = new Set([
  'backend',
  'seed',
  'steps',
  'mode',
  'prompts',
  'controls',
  'concept_op',
  'shape_op',
  'weight_cap',
  'output_dir',
]);

const catalog = fixtureJson<Catalog>('catalog.json');
const kinds = new Set(catalog.operators.map((op) => op.kind));

function checkDraftPatch(body: DraftPatch): void {
  for (const key of Object.keys(body)) {
    expect(DRAFT_KEYS.has(key), `unknown draft field ${key}`).toBe(true);
  }
  if (body.prompts !== undefined) {
    expect(Array.isArray(body.prompts)).toBe(true);
    expect(body.prompts.length).toBeGreaterThan(0);
    for (const prompt of body.prompts) expect(typeof prompt).toBe('string');
  }
  if (body.seed !== undefined) expect(Number.isInteger(body.seed)).toBe(true);
  if (body.steps !== undefined) {
    expect(Number.isInteger(body.steps)).toBe(true);
    expect(body.steps).toBeGreaterThan(0);
  }
  if (body.mode !== undefined) expect(catalog.modes).toContain(body.mode);
  if (body.concept_op !== undefined && body.concept_op !== null) {
    expect(kinds.has(body.concept_op.kind)).toBe(true);
    const hasAlpha = body.concept_op.alpha !== undefined;
    const hasWeights = body.concept_op.weights !== undefined;
    expect(hasAlpha && hasWeights, 'alpha and weights are mutually exclusive').toBe(false);
    if (hasWeights) expect(isAffine(body.concept_op.weights!)).toBe(true);
    if (hasAlpha) expect(Number.isFinite(body.concept_op.alpha)).toBe(true);
  }
}

describe('recorded request sequence', () => {
  const sequence = expectedSequence();

  it('starts by loading the catalog and opening a session', () => {
    expect(sequence[0]).toEqual({ method: 'GET', path: '/operators', body: null });
    expect(sequence[1]).toEqual({ method: 'POST', path: '/sessions', body: null });
  });

  it('covers five drag positions plus the field-map click', () => {
    const generates = sequence.filter((r) => r.path.endsWith('/generate'));
    expect(generates).toHaveLength(6);
    const fieldmaps = sequence.filter((r) => r.path.includes('/fieldmap'));
    expect(fieldmaps).toHaveLength(1);
  });

  it('every draft update body validates against the schema rules', () => {
    const puts = sequence.filter((r) => r.method === 'PUT');
    expect(puts.length).toBeGreaterThan(0);
    for (const request of puts) {
      expect(request.path).toBe('/sessions/:id/job');
      checkDraftPatch(request.body as DraftPatch);
    }
  });

  it('non-PUT requests carry no body', () => {
    for (const request of sequence) {
      if (request.method !== 'PUT') expect(request.body).toBeNull();
    }
  });

  it('each generate follows a draft update and is followed by a preview fetch', () => {
    sequence.forEach((request: RecordedRequest, i: number) => {
      if (request.path.endsWith('/generate')) {
        expect(sequence[i - 1].method).toBe('PUT');
        expect(sequence[i + 1].path).toBe('/results/:id/preview');
      }
    });
  });

  it('the drag sweeps alpha monotonically from 0 to 1', () => {
    const dragWeights = sequence
      .filter((r) => r.method === 'PUT')
      .map((r) => (r.body as DraftPatch).concept_op?.weights)
      .filter((w): w is number[] => w !== undefined);
    const alphas = dragWeights.slice(0, 5).map((w) => w[1]);
    expect(alphas).toEqual([0, 0.25, 0.5, 0.75, 1]);
    // the click lands back inside the hull at the sampled cell
    expect(dragWeights[5]).toEqual([0.25, 0.75]);
  });
});

describe('recorded responses', () => {
  it('catalog lists the four operator kinds and both modes', () => {
    expect([...kinds]).toEqual(['identity', 'lerp', 'slerp', 'affine']);
    expect(catalog.modes).toEqual(['query_wise', 'feature_wise']);
    expect(catalog.weight_rule).toMatch(/sum to 1/);
  });

  it('session fixture carries a full draft', () => {
    const session = fixtureJson<SessionInfo>('session.json');
    expect(session.session_id).toMatch(/^[0-9a-f]{12}$/);
    expect(session.draft.version).toBe(1);
    expect(session.draft.prompts.length).toBeGreaterThan(0);
    expect(session.history.length).toBeGreaterThan(0);
  });

  it('result fixture has the digest pair and a preview link', () => {
    const result = fixtureJson<ResultInfo>('result.json');
    expect(result.status).toBe('done');
    expect(result.digest).toMatch(/^[0-9a-f]{16}$/);
    expect(result.latent_digest).toMatch(/^[0-9a-f]{16}$/);
    expect(result.preview_url).toBe(`/results/${result.result_id}/preview`);
    expect(result.job.prompts).toHaveLength(2);
  });
});
