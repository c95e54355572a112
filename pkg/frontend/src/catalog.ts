import type { ApiClient } from './api.js';
import type { Catalog } from './types.js';

// Operator picker fed by GET /operators. An unreachable service degrades
// to a retry banner instead of a crash; the picker renders one entry per
// catalog kind with its arity and parameter hints inline.

export interface CatalogState {
  status: 'ready' | 'offline';
  catalog: Catalog | null;
}

export async function loadCatalog(api: ApiClient): Promise<CatalogState> {
  try {
    return { status: 'ready', catalog: await api.catalog() };
  } catch {
    return { status: 'offline', catalog: null };
  }
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderPicker(catalog: Catalog, selected?: string): string {
  const entries = catalog.operators
    .map((op) => {
      const params = op.params === null ? 'no parameters' : Object.keys(op.params).join(', ');
      const checked = op.kind === selected ? ' checked' : '';
      return (
        `<label class="picker-entry"><input type="radio" name="operator" value="${escapeHtml(op.kind)}"${checked}>` +
        ` <strong>${escapeHtml(op.kind)}</strong> (arity ${escapeHtml(String(op.arity))};` +
        ` ${escapeHtml(params)}) <em>${escapeHtml(op.doc)}</em></label>`
      );
    })
    .join('');
  return `<fieldset class="picker"><legend>operator</legend>${entries}</fieldset>`;
}

export function renderRetryBanner(): string {
  return (
    '<div class="banner banner-offline">service unreachable.' +
    ' <button class="retry">retry</button></div>'
  );
}
