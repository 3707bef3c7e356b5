// Gradient-boosted decision stumps for one binary target over binary
// features. Second-order (Newton) leaf values with L2 regularization,
// seeded column subsampling per round, deterministic tie-breaking.

import { Rng } from "./rng.js";

export interface Stump {
  feature: number;
  /** leaf value added to the margin when the feature bit is 1 / 0 */
  leafOne: number;
  leafZero: number;
}

export interface BoosterModel {
  bias: number;
  stumps: Stump[];
}

export interface BoosterOptions {
  rounds?: number;
  learningRate?: number;
  /** features considered per round; sampled without replacement */
  columnSample?: number;
  lambda?: number;
  seed?: number;
}

const DEFAULTS = {
  rounds: 80,
  learningRate: 0.3,
  columnSample: 512,
  lambda: 1.0,
  seed: 0,
};

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

/**
 * Train a logistic booster. `labels` must contain both classes; the
 * caller handles single-class targets. Stops early once no sampled
 * split improves the objective.
 */
export function trainBooster(
  features: Uint8Array[],
  labels: number[],
  options: BoosterOptions = {}
): BoosterModel {
  if (features.length !== labels.length) {
    throw new Error("features and labels disagree on row count");
  }
  if (features.length === 0) throw new Error("no training rows");
  const opts = { ...DEFAULTS, ...options };
  const n = features.length;
  const width = features[0]!.length;
  const positives = labels.reduce((acc, y) => acc + y, 0);
  if (positives === 0 || positives === n) {
    throw new Error("single-class training labels");
  }
  const bias = Math.log(positives / (n - positives));
  const rng = new Rng(opts.seed);
  const margins = new Array<number>(n).fill(bias);
  const stumps: Stump[] = [];

  for (let round = 0; round < opts.rounds; round++) {
    const grads = new Array<number>(n);
    const hess = new Array<number>(n);
    let gTotal = 0;
    let hTotal = 0;
    for (let i = 0; i < n; i++) {
      const p = sigmoid(margins[i]!);
      grads[i] = p - labels[i]!;
      hess[i] = p * (1 - p);
      gTotal += grads[i]!;
      hTotal += hess[i]!;
    }
    const rootScore = (gTotal * gTotal) / (hTotal + opts.lambda);
    let best: Stump | null = null;
    let bestGain = 1e-12;
    for (const j of rng.sampleDistinct(width, opts.columnSample)) {
      let gOne = 0;
      let hOne = 0;
      for (let i = 0; i < n; i++) {
        if (features[i]![j] === 1) {
          gOne += grads[i]!;
          hOne += hess[i]!;
        }
      }
      const gZero = gTotal - gOne;
      const hZero = hTotal - hOne;
      const gain =
        (gOne * gOne) / (hOne + opts.lambda) +
        (gZero * gZero) / (hZero + opts.lambda) -
        rootScore;
      if (gain > bestGain) {
        bestGain = gain;
        best = {
          feature: j,
          leafOne: (-gOne / (hOne + opts.lambda)) * opts.learningRate,
          leafZero: (-gZero / (hZero + opts.lambda)) * opts.learningRate,
        };
      }
    }
    if (best === null) break;
    stumps.push(best);
    for (let i = 0; i < n; i++) {
      const delta =
        features[i]![best.feature] === 1 ? best.leafOne : best.leafZero;
      margins[i] = margins[i]! + delta;
    }
  }
  return { bias, stumps };
}

export function predictMargin(model: BoosterModel, row: Uint8Array): number {
  let margin = model.bias;
  for (const stump of model.stumps) {
    margin += row[stump.feature] === 1 ? stump.leafOne : stump.leafZero;
  }
  return margin;
}

/** probability > 0.5 <=> margin > 0 */
export function predictToxic(model: BoosterModel, row: Uint8Array): boolean {
  return predictMargin(model, row) > 0;
}
