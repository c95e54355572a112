import type {
  Catalog,
  DraftAck,
  DraftPatch,
  ErrorDetail,
  ResultInfo,
  SessionInfo,
} from './types.js';

// Thin fetch wrapper around the service routes. Every request is appended
// to an optional log before it is sent, so contract tests can compare the
// exact sequence a user interaction produces against recorded fixtures.

export interface RecordedRequest {
  method: string;
  path: string;
  body: unknown;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly detail: ErrorDetail | null;

  constructor(status: number, detail: ErrorDetail | null, message?: string) {
    super(message ?? (detail ? `${detail.error}: ${detail.message}` : `HTTP ${status}`));
    this.name = 'ApiError';
    this.status = status;
    this.detail = detail;
  }
}

/** Session and result ids are short hex tokens; collapse them so request
 *  sequences can be compared across runs. */
export function normalizePath(path: string): string {
  return path.replace(/\b[0-9a-f]{12}\b/g, ':id');
}

export function normalizeLog(log: RecordedRequest[]): RecordedRequest[] {
  return log.map((entry) => ({ ...entry, path: normalizePath(entry.path) }));
}

async function errorDetail(response: Response): Promise<ErrorDetail | null> {
  try {
    const parsed: unknown = await response.json();
    if (parsed !== null && typeof parsed === 'object' && 'detail' in parsed) {
      const detail = (parsed as { detail: unknown }).detail;
      if (detail !== null && typeof detail === 'object' && 'error' in detail) {
        return detail as ErrorDetail;
      }
    }
  } catch {
    // non-JSON error body; fall through
  }
  return null;
}

export class ApiClient {
  readonly baseUrl: string;
  readonly log: RecordedRequest[];
  private readonly fetchLike: FetchLike;

  constructor(baseUrl: string, fetchLike?: FetchLike, log?: RecordedRequest[]) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchLike = fetchLike ?? ((url, init) => fetch(url, init));
    this.log = log ?? [];
  }

  private async request(method: string, path: string, body: unknown = null): Promise<Response> {
    this.log.push({ method, path, body });
    const init: RequestInit = { method };
    if (body !== null) {
      init.body = JSON.stringify(body);
      init.headers = { 'content-type': 'application/json' };
    }
    const response = await this.fetchLike(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  private async requestJson<T>(method: string, path: string, body: unknown = null): Promise<T> {
    const response = await this.request(method, path, body);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.requestJson('GET', '/health');
  }

  catalog(): Promise<Catalog> {
    return this.requestJson('GET', '/operators');
  }

  createSession(): Promise<SessionInfo> {
    return this.requestJson('POST', '/sessions');
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.requestJson('GET', `/sessions/${sessionId}`);
  }

  updateDraft(sessionId: string, patch: DraftPatch): Promise<DraftAck> {
    return this.requestJson('PUT', `/sessions/${sessionId}/job`, patch);
  }

  generate(sessionId: string): Promise<ResultInfo> {
    return this.requestJson('POST', `/sessions/${sessionId}/generate`);
  }

  getResult(resultId: string): Promise<ResultInfo> {
    return this.requestJson('GET', `/results/${resultId}`);
  }

  async previewBytes(resultId: string): Promise<Uint8Array> {
    const response = await this.request('GET', `/results/${resultId}/preview`);
    return new Uint8Array(await response.arrayBuffer());
  }

  /** Raw canonical field-map text; parse with parseFieldMap, which owns
   *  the structural validation and error wording. */
  async fieldmapText(sessionId: string, axis = 'concept', resolution = 9): Promise<string> {
    const response = await this.request(
      'GET',
      `/sessions/${sessionId}/fieldmap?axis=${axis}&resolution=${resolution}`,
    );
    return response.text();
  }
}
