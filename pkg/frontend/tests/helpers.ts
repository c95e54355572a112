import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';

import type { FetchLike, RecordedRequest } from '../src/api.js';
import type { Catalog, JobDraft, ResultInfo, SessionInfo } from '../src/types.js';

export function fixturePath(name: string): string {
  return fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
}

export function fixtureText(name: string): string {
  return readFileSync(fixturePath(name), 'utf8');
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

/** Tiny deterministic string hash so the stub can hand out digests that are
 *  stable per draft and distinct across drafts. Test infrastructure only. */
export function djb2hex(text: string, salt = 5381): string {
  let hash = salt >>> 0;
  for (let i = 0; i < text.length; i += 1) {
    hash = ((hash * 33) ^ text.charCodeAt(i)) >>> 0;
  }
  return hash.toString(16).padStart(8, '0').repeat(2);
}

export function syntheticPgm(seed: number, size = 8): Uint8Array<ArrayBuffer> {
  const header = new TextEncoder().encode(`P5\n${size} ${size}\n255\n`);
  const raster = new Uint8Array(size * size);
  for (let i = 0; i < raster.length; i += 1) {
    raster[i] = (seed * 31 + i * 7) % 256;
  }
  const out = new Uint8Array(new ArrayBuffer(header.length + raster.length));
  out.set(header);
  out.set(raster, header.length);
  return out;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

function errorResponse(status: number, error: string, message: string, field?: string): Response {
  const detail: Record<string, string> = { error, message };
  if (field !== undefined) detail.field = field;
  return jsonResponse({ detail }, status);
}

/**
 * In-memory stand-in for the exploration service, answering entirely from
 * the recorded fixtures plus a merge-patch draft store. Lets every UI flow
 * run without a network or a Python process.
 */
export class StubService {
  readonly catalog = fixtureJson<Catalog>('catalog.json');
  readonly drafts = new Map<string, JobDraft>();
  readonly results = new Map<string, { draft: JobDraft; id: string }>();
  generateCount = 0;
  private counter = 0;

  private readonly defaultDraft = fixtureJson<SessionInfo>('session.json').draft;

  nextId(): string {
    this.counter += 1;
    return this.counter.toString(16).padStart(12, '0');
  }

  draftDigest(draft: JobDraft): string {
    return djb2hex(JSON.stringify(draft));
  }

  fetchLike: FetchLike = (url, init) => {
    const method = init?.method ?? 'GET';
    const path = url.replace(/^https?:\/\/[^/]+/, '');
    return Promise.resolve(this.route(method, path, init?.body));
  };

  private route(method: string, path: string, rawBody: unknown): Response {
    if (method === 'GET' && path === '/health') return jsonResponse({ status: 'ok' });
    if (method === 'GET' && path === '/operators') return jsonResponse(this.catalog);

    if (method === 'POST' && path === '/sessions') {
      const id = this.nextId();
      this.drafts.set(id, structuredClone(this.defaultDraft));
      const session: SessionInfo = {
        session_id: id,
        draft: this.drafts.get(id)!,
        history: [],
        created: 0,
        updated: 0,
      };
      return jsonResponse(session, 201);
    }

    const draftMatch = path.match(/^\/sessions\/([0-9a-f]{12})\/job$/);
    if (method === 'PUT' && draftMatch !== null) {
      const draft = this.drafts.get(draftMatch[1]);
      if (draft === undefined) return errorResponse(404, 'UnknownSession', 'no such session');
      const patch = JSON.parse(String(rawBody)) as Partial<JobDraft>;
      const merged = { ...draft, ...patch, version: 1 };
      const weights = merged.concept_op?.weights;
      if (weights !== undefined) {
        const sum = weights.reduce((acc, w) => acc + w, 0);
        if (Math.abs(sum - 1) > 1e-6) {
          return errorResponse(
            422,
            'AffineViolation',
            `weights sum to ${sum}, not 1`,
            'concept_op.weights',
          );
        }
        if (merged.concept_op?.kind !== 'affine' && weights.length !== 2) {
          return errorResponse(
            422,
            'ArityMismatch',
            `${merged.concept_op?.kind} requires weights of arity 2`,
            'weights',
          );
        }
        if (merged.concept_op?.kind === 'affine' && weights.length !== merged.prompts?.length) {
          return errorResponse(
            422,
            'ArityMismatch',
            `affine weights must match the ${merged.prompts?.length} prompts`,
            'weights',
          );
        }
      }
      this.drafts.set(draftMatch[1], merged);
      return jsonResponse({
        session_id: draftMatch[1],
        draft: merged,
        digest: this.draftDigest(merged),
        predicted_counters: { concept_query: 3 * merged.steps },
      });
    }

    const generateMatch = path.match(/^\/sessions\/([0-9a-f]{12})\/generate$/);
    if (method === 'POST' && generateMatch !== null) {
      const draft = this.drafts.get(generateMatch[1]);
      if (draft === undefined) return errorResponse(404, 'UnknownSession', 'no such session');
      this.generateCount += 1;
      const id = this.nextId();
      this.results.set(id, { draft: structuredClone(draft), id });
      const result: ResultInfo = {
        result_id: id,
        session_id: generateMatch[1],
        status: 'done',
        digest: this.draftDigest(draft),
        latent_digest: djb2hex(JSON.stringify(draft), 77),
        counters: { concept_query: 3 * draft.steps },
        timings: { total_s: 0.01 },
        error: null,
        preview_url: `/results/${id}/preview`,
        job: structuredClone(draft),
      };
      return jsonResponse(result);
    }

    const previewMatch = path.match(/^\/results\/([0-9a-f]{12})\/preview$/);
    if (method === 'GET' && previewMatch !== null) {
      const record = this.results.get(previewMatch[1]);
      if (record === undefined) return errorResponse(404, 'UnknownResult', 'no such result');
      const body = syntheticPgm(parseInt(this.draftDigest(record.draft).slice(0, 6), 16));
      return new Response(body, {
        status: 200,
        headers: { 'content-type': 'image/x-portable-graymap' },
      });
    }

    const fieldmapMatch = path.match(/^\/sessions\/([0-9a-f]{12})\/fieldmap\?/);
    if (method === 'GET' && fieldmapMatch !== null) {
      if (!this.drafts.has(fieldmapMatch[1])) {
        return errorResponse(404, 'UnknownSession', 'no such session');
      }
      return new Response(fixtureText('fieldmap_arity2.json'), {
        status: 200,
        headers: { 'content-type': 'application/json' },
      });
    }

    return errorResponse(404, 'UnknownRoute', `${method} ${path}`);
  }
}

export function expectedSequence(): RecordedRequest[] {
  return fixtureJson<RecordedRequest[]>('steer_sequence.json');
}
