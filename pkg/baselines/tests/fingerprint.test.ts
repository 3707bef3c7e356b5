import { describe, expect, it } from "vitest";

import { FP_BITS, fingerprint } from "../src/fingerprint.js";
import { parseSmiles } from "../src/smiles.js";

const popcount = (bits: Uint8Array) => bits.reduce((acc, b) => acc + b, 0);

describe("fingerprint", () => {
  it("produces a fixed-width bit vector with a small popcount for ethanol", () => {
    const bits = fingerprint(parseSmiles("CCO"));
    expect(bits).toHaveLength(FP_BITS);
    expect(bits.every((b) => b === 0 || b === 1)).toBe(true);
    const on = popcount(bits);
    expect(on).toBeGreaterThan(0);
    // 3 heavy atoms x 3 radii is the ceiling on distinct substructures
    expect(on).toBeLessThanOrEqual(9);
  });

  it("is deterministic", () => {
    const a = fingerprint(parseSmiles("O=C(C)Oc1ccccc1C(=O)O"));
    const b = fingerprint(parseSmiles("O=C(C)Oc1ccccc1C(=O)O"));
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
  });

  it("gives identical rows for the same SMILES and different rows otherwise", () => {
    const ethanol = fingerprint(parseSmiles("CCO"));
    const ethanolAgain = fingerprint(parseSmiles("CCO"));
    const benzene = fingerprint(parseSmiles("c1ccccc1"));
    expect(Buffer.from(ethanol).equals(Buffer.from(ethanolAgain))).toBe(true);
    expect(Buffer.from(ethanol).equals(Buffer.from(benzene))).toBe(false);
  });

  it("separates substituted variants of a shared scaffold", () => {
    const plain = fingerprint(parseSmiles("CCC(C)C"));
    const chloro = fingerprint(parseSmiles("CCC(Cl)C"));
    expect(Buffer.from(plain).equals(Buffer.from(chloro))).toBe(false);
  });
});
