import type { ApiClient } from './api.js';
import type { ResultInfo } from './types.js';
import { assertSendable } from './weights.js';

// Side-by-side comparison of the two operator placements. Each pane owns a
// session whose draft differs only in mode; compare() pushes one weight
// vector to both, so the panes can never drift apart in weights or seed.

export interface PaneState {
  mode: string;
  sessionId: string;
  result: ResultInfo | null;
  preview: Uint8Array | null;
}

export interface ComparisonBase {
  prompts: string[];
  seed: number;
  steps: number;
  kind: string;
}

export const COMPARISON_MODES = ['query_wise', 'feature_wise'] as const;

export class ComparisonController {
  readonly panes: PaneState[] = [];
  private readonly api: ApiClient;
  private readonly base: ComparisonBase;
  private readonly fetchPreviews: boolean;

  constructor(api: ApiClient, base: ComparisonBase, fetchPreviews = true) {
    this.api = api;
    this.base = base;
    this.fetchPreviews = fetchPreviews;
  }

  async init(initialWeights: number[]): Promise<void> {
    assertSendable(initialWeights);
    this.panes.length = 0;
    for (const mode of COMPARISON_MODES) {
      const session = await this.api.createSession();
      await this.api.updateDraft(session.session_id, {
        prompts: this.base.prompts,
        seed: this.base.seed,
        steps: this.base.steps,
        mode,
        concept_op: { kind: this.base.kind, weights: initialWeights },
      });
      this.panes.push({ mode, sessionId: session.session_id, result: null, preview: null });
    }
  }

  /** Generate both panes from the identical weight vector. */
  async compare(weights: number[]): Promise<ResultInfo[]> {
    if (this.panes.length !== COMPARISON_MODES.length) {
      throw new Error('comparison not initialized');
    }
    assertSendable(weights);
    const results = await Promise.all(
      this.panes.map(async (pane) => {
        await this.api.updateDraft(pane.sessionId, {
          concept_op: { kind: this.base.kind, weights },
        });
        const result = await this.api.generate(pane.sessionId);
        pane.result = result;
        pane.preview = this.fetchPreviews ? await this.api.previewBytes(result.result_id) : null;
        return result;
      }),
    );
    return results;
  }
}
