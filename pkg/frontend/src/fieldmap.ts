import type { FieldMapJson, FieldSampleJson, Region } from './types.js';

// Field-map presentation. Arity-2 maps become a color strip that sits under
// the alpha slider, arity-3 maps a simplex triangle, anything wider falls
// back to a plain table. Cells carry their weight coordinates so a click
// can set the weight control to that exact point.

export const REGION_CLASS: Record<Region, string> = {
  meaningful: 'region-meaningful',
  ambiguous: 'region-ambiguous',
  desert: 'region-desert',
};

const REGIONS: readonly Region[] = ['meaningful', 'ambiguous', 'desert'];

export function parseFieldMap(text: string): FieldMapJson {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error(`malformed field map: ${err instanceof Error ? err.message : String(err)}`);
  }
  if (raw === null || typeof raw !== 'object') {
    throw new Error('malformed field map: not a JSON object');
  }
  const map = raw as Partial<FieldMapJson>;
  if (!Array.isArray(map.samples) || map.samples.length === 0) {
    throw new Error('malformed field map: missing samples');
  }
  for (const sample of map.samples) {
    if (!Array.isArray(sample.coords) || !REGIONS.includes(sample.region)) {
      throw new Error('malformed field map: bad sample entry');
    }
  }
  if (typeof map.axis !== 'string' || typeof map.resolution !== 'number') {
    throw new Error('malformed field map: missing axis or resolution');
  }
  return map as FieldMapJson;
}

export function mapArity(map: FieldMapJson): number {
  return map.samples[0].coords.length;
}

export interface StripCell {
  weights: number[];
  alpha: number;
  region: Region;
  score: number;
}

/** Arity-2 view: one cell per sample, ordered by alpha (weight on the
 *  second input) so the strip lines up with the slider axis. */
export function stripCells(map: FieldMapJson): StripCell[] {
  if (mapArity(map) !== 2) {
    throw new Error(`strip view needs arity 2, got ${mapArity(map)}`);
  }
  return map.samples
    .map((sample) => ({
      weights: sample.coords,
      alpha: sample.coords[1],
      region: sample.region,
      score: sample.score,
    }))
    .sort((a, b) => a.alpha - b.alpha);
}

export interface Band {
  region: Region;
  start: number;
  end: number; // inclusive cell index
}

/** Contiguous same-region runs; these become the visible color bands. */
export function colorBands(cells: StripCell[]): Band[] {
  const bands: Band[] = [];
  for (let i = 0; i < cells.length; i += 1) {
    const last = bands[bands.length - 1];
    if (last !== undefined && last.region === cells[i].region) {
      last.end = i;
    } else {
      bands.push({ region: cells[i].region, start: i, end: i });
    }
  }
  return bands;
}

/** The weight vector of the sample at a given alpha, or null if the grid
 *  has no cell there. */
export function weightsAtAlpha(map: FieldMapJson, alpha: number): number[] | null {
  for (const sample of map.samples) {
    if (sample.coords.length === 2 && Math.abs(sample.coords[1] - alpha) < 1e-9) {
      return sample.coords;
    }
  }
  return null;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function cellButton(sample: { weights: number[]; region: Region; score: number }, label: string): string {
  const weights = JSON.stringify(sample.weights);
  const title = `${label} score=${sample.score}`;
  return (
    `<button class="fm-cell ${REGION_CLASS[sample.region]}"` +
    ` data-weights="${escapeHtml(weights)}" title="${escapeHtml(title)}"></button>`
  );
}

export function renderStrip(map: FieldMapJson): string {
  const cells = stripCells(map)
    .map((cell) => cellButton(cell, `α=${cell.alpha}`))
    .join('');
  return `<div class="fm-strip" data-bands="${colorBands(stripCells(map)).length}">${cells}</div>`;
}

/** Arity-3 view: rows by the first weight, descending, so the single
 *  w0=1 cell forms the apex and the w0=0 edge the base. */
export function triangleRows(map: FieldMapJson): FieldSampleJson[][] {
  if (mapArity(map) !== 3) {
    throw new Error(`triangle view needs arity 3, got ${mapArity(map)}`);
  }
  const byLevel = new Map<number, FieldSampleJson[]>();
  for (const sample of map.samples) {
    const key = sample.coords[0];
    const row = byLevel.get(key);
    if (row === undefined) byLevel.set(key, [sample]);
    else row.push(sample);
  }
  const levels = [...byLevel.keys()].sort((a, b) => b - a);
  return levels.map((level) =>
    byLevel.get(level)!.slice().sort((a, b) => a.coords[1] - b.coords[1]),
  );
}

export function renderTriangle(map: FieldMapJson): string {
  const rows = triangleRows(map)
    .map((row) => {
      const cells = row
        .map((sample) =>
          cellButton(
            { weights: sample.coords, region: sample.region, score: sample.score },
            `w=[${sample.coords.join(', ')}]`,
          ),
        )
        .join('');
      return `<div class="fm-row">${cells}</div>`;
    })
    .join('');
  return `<div class="fm-triangle">${rows}</div>`;
}

/** Fallback for arity 4 and up: no geometric render, just the numbers. */
export function renderTable(map: FieldMapJson): string {
  const rows = map.samples
    .map((sample) => {
      const weights = escapeHtml(JSON.stringify(sample.coords));
      return (
        `<tr class="${REGION_CLASS[sample.region]}" data-weights="${weights}">` +
        `<td>${sample.coords.join(', ')}</td><td>${sample.region}</td><td>${sample.score}</td></tr>`
      );
    })
    .join('');
  return (
    '<table class="fm-table"><thead><tr><th>weights</th><th>region</th><th>score</th></tr></thead>' +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderFieldMap(map: FieldMapJson): string {
  const arity = mapArity(map);
  if (arity === 2) return renderStrip(map);
  if (arity === 3) return renderTriangle(map);
  return renderTable(map);
}

export function renderErrorTile(message: string): string {
  return `<div class="fm-error">field map unavailable: ${escapeHtml(message)}</div>`;
}
