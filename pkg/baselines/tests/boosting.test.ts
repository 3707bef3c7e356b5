import { describe, expect, it } from "vitest";

import { predictMargin, predictToxic, trainBooster } from "../src/boosting.js";

/** rows whose label is exactly bit `target`, with deterministic noise bits */
function syntheticRows(n: number, width: number, target: number) {
  const features: Uint8Array[] = [];
  const labels: number[] = [];
  for (let i = 0; i < n; i++) {
    const row = new Uint8Array(width);
    row[target] = i % 2;
    row[(i * 7 + 3) % width] = 1;
    row[(i * 13 + 1) % width] = 1;
    features.push(row);
    labels.push(i % 2);
  }
  return { features, labels };
}

describe("trainBooster", () => {
  it("fits linearly separable data exactly", () => {
    const { features, labels } = syntheticRows(40, 64, 20);
    const model = trainBooster(features, labels, { seed: 3, columnSample: 64 });
    expect(model.stumps.length).toBeGreaterThan(0);
    features.forEach((row, i) => {
      expect(predictToxic(model, row)).toBe(labels[i] === 1);
    });
  });

  it("is deterministic for a fixed seed", () => {
    const { features, labels } = syntheticRows(30, 128, 11);
    const a = trainBooster(features, labels, { seed: 9 });
    const b = trainBooster(features, labels, { seed: 9 });
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it("rejects single-class labels", () => {
    const rows = [new Uint8Array([1, 0]), new Uint8Array([0, 1])];
    expect(() => trainBooster(rows, [1, 1], {})).toThrow(/single-class/);
    expect(() => trainBooster(rows, [0, 0], {})).toThrow(/single-class/);
  });

  it("rejects empty and mismatched inputs", () => {
    expect(() => trainBooster([], [], {})).toThrow(/no training rows/);
    expect(() => trainBooster([new Uint8Array(4)], [0, 1], {})).toThrow(
      /row count/
    );
  });

  it("degenerates to the majority class on constant features", () => {
    const rows = Array.from({ length: 8 }, () => new Uint8Array(16));
    const labels = [1, 1, 1, 1, 1, 0, 0, 0];
    const model = trainBooster(rows, labels, { seed: 0 });
    // no split clears the gain threshold, so only the bias remains
    expect(model.stumps).toHaveLength(0);
    expect(model.bias).toBeGreaterThan(0);
    expect(predictMargin(model, rows[0]!)).toBe(model.bias);
  });
});
