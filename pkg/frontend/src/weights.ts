// Affine weight handling for the slider panel. The last weight is never a
// slider of its own: it is derived as 1 minus the sum of the others, so any
// vector the control emits satisfies the affine constraint by construction.
// A guard still checks before a request leaves the client, because a bug
// here must not turn into a 422 round trip.

export const AFFINE_TOLERANCE = 1e-6;

export function deriveLast(others: number[]): number {
  return 1 - others.reduce((acc, v) => acc + v, 0);
}

export function affineError(weights: number[]): number {
  return Math.abs(weights.reduce((acc, v) => acc + v, 0) - 1);
}

export function isAffine(weights: number[]): boolean {
  return weights.length > 0 && weights.every(Number.isFinite) && affineError(weights) <= AFFINE_TOLERANCE;
}

/** Two-input convenience: alpha is the weight on the second input. */
export function weightsFromAlpha(alpha: number): [number, number] {
  return [1 - alpha, alpha];
}

export function alphaFromWeights(weights: number[]): number {
  if (weights.length !== 2) throw new Error(`alpha view needs 2 weights, got ${weights.length}`);
  return weights[1];
}

/**
 * Slider-backed weight vector. Sliders drive the first arity-1 entries;
 * the final entry is always derived. With extrapolation off, slider values
 * clamp to [0, 1]; switching it on unlocks values outside the hull.
 */
export class WeightControl {
  readonly arity: number;
  extrapolate: boolean;
  private sliders: number[];

  constructor(arity: number, extrapolate = false) {
    if (!Number.isInteger(arity) || arity < 2) {
      throw new Error(`weight control needs arity >= 2, got ${arity}`);
    }
    this.arity = arity;
    this.extrapolate = extrapolate;
    this.sliders = new Array(arity - 1).fill(0);
    this.sliders[0] = 1; // start on the first input
  }

  private clamp(value: number): number {
    if (this.extrapolate) return value;
    return Math.min(1, Math.max(0, value));
  }

  setSlider(index: number, value: number): void {
    if (index < 0 || index >= this.arity - 1) {
      throw new Error(`slider index ${index} out of range for arity ${this.arity}`);
    }
    if (!Number.isFinite(value)) throw new Error('slider value must be finite');
    this.sliders[index] = this.clamp(value);
  }

  /** Adopt a full weight vector, e.g. from a field-map cell click. */
  setWeights(weights: number[]): void {
    if (weights.length !== this.arity) {
      throw new Error(`expected ${this.arity} weights, got ${weights.length}`);
    }
    if (!isAffine(weights)) {
      throw new Error(`weights must sum to 1 (off by ${affineError(weights)})`);
    }
    this.sliders = weights.slice(0, this.arity - 1);
  }

  get weights(): number[] {
    return [...this.sliders, deriveLast(this.sliders)];
  }
}

/**
 * Final gate before a weight vector is allowed into a request body.
 * Throws instead of sending, which is the whole point.
 */
export function assertSendable(weights: number[]): void {
  if (!weights.every(Number.isFinite)) {
    throw new Error('weights must be finite numbers');
  }
  if (!isAffine(weights)) {
    throw new Error(
      `refusing to send weights ${JSON.stringify(weights)}: sum is off by ${affineError(weights)}`,
    );
  }
}

/** Arity mismatch check against the operator catalog before any request. */
export function arityProblem(kind: string, catalogArity: number | string, promptCount: number): string | null {
  if (typeof catalogArity === 'number' && catalogArity !== promptCount) {
    return `${kind} takes exactly ${catalogArity} prompt${catalogArity === 1 ? '' : 's'}, got ${promptCount}`;
  }
  if (typeof catalogArity === 'string' && promptCount < 1) {
    return `${kind} needs at least one prompt`;
  }
  return null;
}
