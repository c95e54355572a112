import { ApiClient, ApiError } from './api.js';
import { loadCatalog, renderPicker, renderRetryBanner } from './catalog.js';
import { ComparisonController } from './comparison.js';
import { loadConfig } from './config.js';
import { parseFieldMap, renderErrorTile, renderFieldMap } from './fieldmap.js';
import { grayToRgba, parsePgm } from './preview.js';
import { SteerController, type HistoryEntry } from './steer.js';
import { arityProblem, WeightControl } from './weights.js';
import type { Catalog } from './types.js';

// DOM glue only: every behavior lives in the modules above, this file
// binds them to the static skeleton in index.html.

function el<T extends HTMLElement>(root: ParentNode, id: string): T {
  const found = root.querySelector(`#${id}`);
  if (found === null) throw new Error(`missing element #${id}`);
  return found as T;
}

function drawPreview(canvas: HTMLCanvasElement, bytes: Uint8Array | null): void {
  if (bytes === null) return;
  const gray = parsePgm(bytes);
  canvas.width = gray.width;
  canvas.height = gray.height;
  const ctx = canvas.getContext('2d');
  if (ctx === null) return;
  ctx.putImageData(new ImageData(grayToRgba(gray), gray.width, gray.height), 0, 0);
}

export async function initApp(root: Document | HTMLElement): Promise<void> {
  const config = await loadConfig();
  const api = new ApiClient(config.serviceUrl);

  const status = el<HTMLDivElement>(root, 'status');
  const pickerSlot = el<HTMLDivElement>(root, 'picker-slot');
  const promptsBox = el<HTMLTextAreaElement>(root, 'prompts');
  const seedBox = el<HTMLInputElement>(root, 'seed');
  const stepsBox = el<HTMLInputElement>(root, 'steps');
  const modeBox = el<HTMLSelectElement>(root, 'mode');
  const applyButton = el<HTMLButtonElement>(root, 'apply');
  const arityError = el<HTMLDivElement>(root, 'arity-error');
  const steering = el<HTMLElement>(root, 'steering');
  const slidersBox = el<HTMLDivElement>(root, 'sliders');
  const extrapolateBox = el<HTMLInputElement>(root, 'extrapolate');
  const readout = el<HTMLDivElement>(root, 'weight-readout');
  const requestError = el<HTMLDivElement>(root, 'request-error');
  const previewCanvas = el<HTMLCanvasElement>(root, 'preview');
  const resultMeta = el<HTMLDivElement>(root, 'result-meta');
  const historyBox = el<HTMLDivElement>(root, 'history');
  const fieldmapBox = el<HTMLDivElement>(root, 'fieldmap');
  const fieldmapRes = el<HTMLInputElement>(root, 'fieldmap-res');

  let catalog: Catalog | null = null;
  let control: WeightControl | null = null;
  let steer: SteerController | null = null;

  const prompts = () =>
    promptsBox.value
      .split('\n')
      .map((line) => line.trim())
      .filter((line) => line.length > 0);

  const selectedKind = (): string => {
    const checked = (root instanceof Document ? root : root.ownerDocument).querySelector(
      'input[name="operator"]:checked',
    );
    return checked instanceof HTMLInputElement ? checked.value : 'lerp';
  };

  async function showCatalog(): Promise<void> {
    const state = await loadCatalog(api);
    if (state.status === 'offline') {
      status.innerHTML = renderRetryBanner();
      status.querySelector('.retry')?.addEventListener('click', () => void showCatalog());
      return;
    }
    status.innerHTML = '';
    catalog = state.catalog;
    pickerSlot.innerHTML = renderPicker(state.catalog!, 'lerp');
  }

  function renderHistory(entries: HistoryEntry[]): void {
    historyBox.innerHTML = '';
    for (const entry of entries) {
      const fig = document.createElement('figure');
      const canvas = document.createElement('canvas');
      drawPreview(canvas, entry.preview);
      const caption = document.createElement('figcaption');
      caption.textContent = `[${entry.weights.map((w) => w.toFixed(2)).join(', ')}] ${entry.digest.slice(0, 8)}`;
      fig.append(canvas, caption);
      historyBox.append(fig);
    }
  }

  function renderSliders(): void {
    if (control === null) return;
    slidersBox.innerHTML = '';
    const weights = control.weights;
    for (let i = 0; i < control.arity - 1; i += 1) {
      const label = document.createElement('label');
      label.className = 'row';
      label.textContent = `w${i} `;
      const slider = document.createElement('input');
      slider.type = 'range';
      slider.min = control.extrapolate ? '-1' : '0';
      slider.max = control.extrapolate ? '2' : '1';
      slider.step = '0.01';
      slider.value = String(weights[i]);
      slider.addEventListener('input', () => {
        control!.setSlider(i, Number(slider.value));
        pushWeights();
      });
      label.append(slider);
      slidersBox.append(label);
    }
    readout.textContent = `weights: [${weights.map((w) => w.toFixed(3)).join(', ')}]`;
  }

  function pushWeights(): void {
    if (control === null || steer === null) return;
    requestError.textContent = '';
    readout.textContent = `weights: [${control.weights.map((w) => w.toFixed(3)).join(', ')}]`;
    try {
      steer.setWeights(control.weights);
    } catch (err) {
      requestError.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  function showRequestError(err: unknown): void {
    if (err instanceof ApiError && err.detail !== null) {
      const where = err.detail.field !== undefined ? ` (at ${err.detail.field})` : '';
      requestError.textContent = `${err.detail.error}${where}: ${err.detail.message}`;
    } else {
      requestError.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  applyButton.addEventListener('click', () => {
    void (async () => {
      const kind = selectedKind();
      const lines = prompts();
      if (catalog !== null) {
        const op = catalog.operators.find((entry) => entry.kind === kind);
        const problem = op !== undefined ? arityProblem(kind, op.arity, lines.length) : null;
        arityError.textContent = problem ?? '';
        if (problem !== null) return; // request blocked
      }
      const session = await api.createSession();
      control = new WeightControl(Math.max(lines.length, 2), extrapolateBox.checked);
      steer = new SteerController(api, session.session_id, {
        kind,
        onResult: (entry) => {
          drawPreview(previewCanvas, entry.preview);
          resultMeta.textContent = `digest ${entry.digest} latent ${entry.latentDigest ?? '-'}`;
          renderHistory(steer!.history);
        },
        onError: showRequestError,
      });
      try {
        await api.updateDraft(session.session_id, {
          prompts: lines,
          seed: Number(seedBox.value),
          steps: Number(stepsBox.value),
          mode: modeBox.value,
          concept_op: { kind, alpha: 0 },
        });
      } catch (err) {
        showRequestError(err);
        return;
      }
      steering.hidden = false;
      renderSliders();
      pushWeights();
    })();
  });

  extrapolateBox.addEventListener('change', () => {
    if (control !== null) {
      control.extrapolate = extrapolateBox.checked;
      renderSliders();
    }
  });

  el<HTMLButtonElement>(root, 'fieldmap-load').addEventListener('click', () => {
    void (async () => {
      if (steer === null || control === null) return;
      try {
        const text = await api.fieldmapText(steer.sessionId, 'concept', Number(fieldmapRes.value));
        fieldmapBox.innerHTML = renderFieldMap(parseFieldMap(text));
      } catch (err) {
        fieldmapBox.innerHTML = renderErrorTile(err instanceof Error ? err.message : String(err));
      }
    })();
  });

  fieldmapBox.addEventListener('click', (event) => {
    const target = event.target;
    if (!(target instanceof HTMLElement)) return;
    const cell = target.closest('[data-weights]');
    if (!(cell instanceof HTMLElement) || control === null) return;
    const weights = JSON.parse(cell.dataset.weights ?? '[]') as number[];
    control.setWeights(weights);
    renderSliders();
    pushWeights();
  });

  el<HTMLButtonElement>(root, 'compare').addEventListener('click', () => {
    void (async () => {
      if (control === null) return;
      const comparison = new ComparisonController(api, {
        prompts: prompts(),
        seed: Number(seedBox.value),
        steps: Number(stepsBox.value),
        kind: selectedKind(),
      });
      try {
        await comparison.init(control.weights);
        await comparison.compare(control.weights);
      } catch (err) {
        showRequestError(err);
        return;
      }
      const [left, right] = comparison.panes;
      drawPreview(el<HTMLCanvasElement>(root, 'pane-left'), left.preview);
      drawPreview(el<HTMLCanvasElement>(root, 'pane-right'), right.preview);
      el<HTMLElement>(root, 'pane-left-label').textContent =
        `${left.mode} ${left.result?.latent_digest ?? ''}`;
      el<HTMLElement>(root, 'pane-right-label').textContent =
        `${right.mode} ${right.result?.latent_digest ?? ''}`;
    })();
  });

  await showCatalog();
}

if (typeof document !== 'undefined' && document.getElementById('app') !== null) {
  void initApp(document);
}
