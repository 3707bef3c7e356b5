// Circular substructure fingerprints over the parsed molecular graph.
// Atom environments are hashed per radius layer; each hash sets one bit.

import type { BondOrder, Molecule } from "./smiles.js";

export const FP_BITS = 2048;
export const FP_RADIUS = 2;

// FNV-1a over a stream of integers, 32-bit
function fnv1a(values: number[]): number {
  let hash = 0x811c9dc5;
  for (const value of values) {
    let v = value >>> 0;
    for (let byte = 0; byte < 4; byte++) {
      hash ^= v & 0xff;
      hash = Math.imul(hash, 0x01000193);
      v >>>= 8;
    }
  }
  return hash >>> 0;
}

const BOND_CODE: Record<BondOrder, number> = {
  single: 10,
  double: 20,
  triple: 30,
  aromatic: 15,
};

function initialInvariant(mol: Molecule, idx: number, degree: number): number {
  const atom = mol.atoms[idx]!;
  return fnv1a([
    atom.atomicNumber,
    degree,
    mol.hydrogens[idx]!,
    atom.charge & 0xff,
    atom.isotope,
    mol.inRing[idx] ? 1 : 0,
    atom.aromatic ? 1 : 0,
  ]);
}

/**
 * 2048-bit radius-2 circular fingerprint.
 *
 * Layer 0 hashes per-atom invariants (element, degree, H count, charge,
 * isotope, ring flag, aromatic flag); each further layer rehashes the
 * atom with its sorted (bond, neighbor) invariant pairs. Every hash seen
 * at any layer sets bit (hash mod 2048).
 */
export function fingerprint(
  mol: Molecule,
  radius: number = FP_RADIUS,
  nBits: number = FP_BITS
): Uint8Array {
  const n = mol.atoms.length;
  const neighbors: Array<Array<[number, number]>> = Array.from(
    { length: n },
    () => []
  );
  for (const bond of mol.bonds) {
    neighbors[bond.a]!.push([BOND_CODE[bond.order], bond.b]);
    neighbors[bond.b]!.push([BOND_CODE[bond.order], bond.a]);
  }
  let current: number[] = [];
  for (let i = 0; i < n; i++) {
    current.push(initialInvariant(mol, i, neighbors[i]!.length));
  }
  const seen = new Set<number>(current);
  for (let layer = 1; layer <= radius; layer++) {
    const next: number[] = [];
    for (let i = 0; i < n; i++) {
      const parts: Array<[number, number]> = neighbors[i]!.map(
        ([code, other]) => [code, current[other]!]
      );
      parts.sort((x, y) => (x[1] !== y[1] ? x[1] - y[1] : x[0] - y[0]));
      const stream = [layer, current[i]!];
      for (const [code, inv] of parts) stream.push(code, inv);
      const invariant = fnv1a(stream);
      next.push(invariant);
      seen.add(invariant);
    }
    current = next;
  }
  const bits = new Uint8Array(nBits);
  for (const hash of seen) bits[hash % nBits] = 1;
  return bits;
}
