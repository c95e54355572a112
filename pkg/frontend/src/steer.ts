import type { ApiClient } from './api.js';
import { debounce, STEER_DEBOUNCE_MS, type Debounced } from './debounce.js';
import { assertSendable, weightsFromAlpha } from './weights.js';

// The live steering loop: weight changes are debounced into
// PUT draft + POST generate + preview fetch, with at most one generation
// in flight. A newer weight vector arriving mid-flight replaces whatever
// was queued, so only the latest slider position is honored.

export interface HistoryEntry {
  resultId: string;
  digest: string;
  latentDigest: string | null;
  weights: number[];
  previewUrl: string;
  preview: Uint8Array | null;
}

export interface SteerOptions {
  kind?: string;
  waitMs?: number;
  historyLimit?: number;
  fetchPreviews?: boolean;
  onResult?: (entry: HistoryEntry) => void;
  onError?: (err: unknown) => void;
}

export const HISTORY_LIMIT = 20;

export class SteerController {
  readonly history: HistoryEntry[] = [];
  readonly sessionId: string;
  private readonly api: ApiClient;
  private readonly kind: string;
  private readonly historyLimit: number;
  private readonly fetchPreviews: boolean;
  private readonly onResult?: (entry: HistoryEntry) => void;
  private readonly onError?: (err: unknown) => void;
  private readonly push: Debounced<[number[]]>;
  private queued: number[] | null = null;
  private inFlight: Promise<void> | null = null;
  private lastError: unknown = null;

  constructor(api: ApiClient, sessionId: string, options: SteerOptions = {}) {
    this.api = api;
    this.sessionId = sessionId;
    this.kind = options.kind ?? 'lerp';
    this.historyLimit = options.historyLimit ?? HISTORY_LIMIT;
    this.fetchPreviews = options.fetchPreviews ?? true;
    this.onResult = options.onResult;
    this.onError = options.onError;
    this.push = debounce((weights: number[]) => this.dispatch(weights), options.waitMs ?? STEER_DEBOUNCE_MS);
  }

  /** Guarded entry point: weights that break the affine constraint throw
   *  here and never reach the network. */
  setWeights(weights: number[]): void {
    assertSendable(weights);
    this.push(weights);
  }

  setAlpha(alpha: number): void {
    this.setWeights(weightsFromAlpha(alpha));
  }

  private dispatch(weights: number[]): void {
    if (this.inFlight !== null) {
      this.queued = weights; // newest wins; the previous queued vector is dropped
      return;
    }
    this.inFlight = this.run(weights).finally(() => {
      this.inFlight = null;
      const next = this.queued;
      this.queued = null;
      if (next !== null) this.dispatch(next);
    });
  }

  private async run(weights: number[]): Promise<void> {
    try {
      await this.api.updateDraft(this.sessionId, {
        concept_op: { kind: this.kind, weights },
      });
      const result = await this.api.generate(this.sessionId);
      const preview = this.fetchPreviews ? await this.api.previewBytes(result.result_id) : null;
      const entry: HistoryEntry = {
        resultId: result.result_id,
        digest: result.digest,
        latentDigest: result.latent_digest,
        weights,
        previewUrl: result.preview_url,
        preview,
      };
      this.history.push(entry);
      if (this.history.length > this.historyLimit) {
        this.history.splice(0, this.history.length - this.historyLimit);
      }
      this.onResult?.(entry);
    } catch (err) {
      this.lastError = err;
      this.onError?.(err);
    }
  }

  /** Flush the debounce and wait until nothing is queued or in flight.
   *  Rethrows the most recent request failure, if any. */
  async settle(): Promise<void> {
    this.push.flush();
    while (this.inFlight !== null) {
      await this.inFlight;
    }
    if (this.lastError !== null) {
      const err = this.lastError;
      this.lastError = null;
      throw err instanceof Error ? err : new Error(String(err));
    }
  }
}
