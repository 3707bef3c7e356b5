// Minimal SMILES reader: enough structure for hashing-based fingerprints.
// Aromaticity is taken as written (lowercase atoms), not perceived.

export class InvalidSmilesError extends Error {}

export type BondOrder = "single" | "double" | "triple" | "aromatic";

export interface Atom {
  index: number;
  element: string;
  atomicNumber: number;
  aromatic: boolean;
  charge: number;
  isotope: number;
  /** explicit H count from a bracket atom, or -1 when implicit */
  bracketH: number;
}

export interface Bond {
  a: number;
  b: number;
  order: BondOrder;
}

export interface Molecule {
  atoms: Atom[];
  bonds: Bond[];
  /** implicit+explicit hydrogen count per atom */
  hydrogens: number[];
  /** true for atoms on at least one cycle */
  inRing: boolean[];
}

const ATOMIC_NUMBERS: Record<string, number> = {
  H: 1, He: 2, Li: 3, Be: 4, B: 5, C: 6, N: 7, O: 8, F: 9, Ne: 10,
  Na: 11, Mg: 12, Al: 13, Si: 14, P: 15, S: 16, Cl: 17, K: 19, Ca: 20,
  Fe: 26, Co: 27, Ni: 28, Cu: 29, Zn: 30, As: 33, Se: 34, Br: 35,
  Ag: 47, Sn: 50, I: 53, Pt: 78, Au: 79, Hg: 80,
};

// organic-subset symbols usable outside brackets
const ORGANIC = ["Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I"];
const AROMATIC_ORGANIC = ["b", "c", "n", "o", "p", "s"];

// candidate valences for implicit hydrogen filling
const VALENCES: Record<string, number[]> = {
  B: [3], C: [4], N: [3, 5], O: [2], P: [3, 5], S: [2, 4, 6],
  F: [1], Cl: [1], Br: [1], I: [1],
};

const BOND_VALUE: Record<BondOrder, number> = {
  single: 1, double: 2, triple: 3, aromatic: 1.5,
};

interface PendingRing {
  atom: number;
  order: BondOrder | null;
}

function bondSymbolToOrder(ch: string): BondOrder {
  switch (ch) {
    case "-": case "/": case "\\": return "single";
    case "=": return "double";
    case "#": return "triple";
    case ":": return "aromatic";
    default: throw new InvalidSmilesError(`unsupported bond symbol '${ch}'`);
  }
}

/** Parse one bracket atom body (between '[' and ']'). */
function parseBracket(body: string, index: number): Atom {
  const m = body.match(
    /^(\d+)?([A-Z][a-z]?|[bcnops])(@{1,2})?(H\d*)?([+-]\d+|\++|-+)?(?::\d+)?$/
  );
  if (!m) throw new InvalidSmilesError(`bad bracket atom [${body}]`);
  const [, isotope, rawSymbol, , hPart, chargePart] = m;
  const aromatic = rawSymbol === rawSymbol!.toLowerCase();
  const element = aromatic
    ? rawSymbol!.charAt(0).toUpperCase() + rawSymbol!.slice(1)
    : rawSymbol!;
  const atomicNumber = ATOMIC_NUMBERS[element];
  if (atomicNumber === undefined) {
    throw new InvalidSmilesError(`unknown element '${element}'`);
  }
  let charge = 0;
  if (chargePart) {
    if (/^[+-]\d+$/.test(chargePart)) {
      charge = parseInt(chargePart, 10);
    } else {
      charge = (chargePart.startsWith("+") ? 1 : -1) * chargePart.length;
    }
  }
  let bracketH = 0;
  if (hPart) bracketH = hPart.length === 1 ? 1 : parseInt(hPart.slice(1), 10);
  return {
    index,
    element,
    atomicNumber,
    aromatic,
    charge,
    isotope: isotope ? parseInt(isotope, 10) : 0,
    bracketH,
  };
}

/** Non-bridge bonds lie on a cycle; their endpoints are ring atoms. */
function markRingAtoms(n: number, bonds: Bond[]): boolean[] {
  const adj: Array<Array<[number, number]>> = Array.from({ length: n }, () => []);
  bonds.forEach((bond, i) => {
    adj[bond.a]!.push([bond.b, i]);
    adj[bond.b]!.push([bond.a, i]);
  });
  const disc = new Array<number>(n).fill(-1);
  const low = new Array<number>(n).fill(0);
  const isBridge = new Array<boolean>(bonds.length).fill(false);
  let timer = 0;
  // iterative DFS lowlink; recursion depth is unbounded on long chains
  for (let root = 0; root < n; root++) {
    if (disc[root] !== -1) continue;
    const stack: Array<[number, number, number]> = [[root, -1, 0]];
    while (stack.length > 0) {
      const frame = stack[stack.length - 1]!;
      const [v, parentEdge] = frame;
      if (frame[2] === 0) {
        disc[v] = low[v] = timer++;
      }
      let advanced = false;
      while (frame[2] < adj[v]!.length) {
        const [to, edge] = adj[v]![frame[2]]!;
        frame[2] += 1;
        if (edge === parentEdge) continue;
        if (disc[to] !== -1) {
          low[v] = Math.min(low[v]!, disc[to]!);
        } else {
          stack.push([to, edge, 0]);
          advanced = true;
          break;
        }
      }
      if (!advanced && frame[2] >= adj[v]!.length) {
        stack.pop();
        if (parentEdge !== -1) {
          const bond = bonds[parentEdge]!;
          const parent = bond.a === v ? bond.b : bond.a;
          low[parent] = Math.min(low[parent]!, low[v]!);
          if (low[v]! > disc[parent]!) isBridge[parentEdge] = true;
        }
      }
    }
  }
  const inRing = new Array<boolean>(n).fill(false);
  bonds.forEach((bond, i) => {
    if (!isBridge[i]) {
      inRing[bond.a] = true;
      inRing[bond.b] = true;
    }
  });
  return inRing;
}

function implicitHydrogens(atom: Atom, bondOrderSum: number): number {
  if (atom.bracketH >= 0) return atom.bracketH;
  const valences = VALENCES[atom.element];
  if (!valences) return 0;
  // an aromatic atom's written bonds already carry its ring obligations
  const used = Math.ceil(bondOrderSum);
  for (const v of valences) {
    if (v >= used) return v - used;
  }
  return 0;
}

export function parseSmiles(text: string): Molecule {
  const smiles = text.trim();
  if (smiles.length === 0) throw new InvalidSmilesError("empty SMILES");
  const atoms: Atom[] = [];
  const bonds: Bond[] = [];
  const branchStack: number[] = [];
  const rings = new Map<string, PendingRing>();
  let prev = -1;
  let pendingOrder: BondOrder | null = null;
  let i = 0;

  const addAtom = (atom: Atom) => {
    atoms.push(atom);
    if (prev >= 0) {
      const order =
        pendingOrder ??
        (atoms[prev]!.aromatic && atom.aromatic ? "aromatic" : "single");
      bonds.push({ a: prev, b: atom.index, order });
    }
    prev = atom.index;
    pendingOrder = null;
  };

  const closeRing = (label: string) => {
    if (prev < 0) throw new InvalidSmilesError("ring bond before any atom");
    const open = rings.get(label);
    if (!open) {
      rings.set(label, { atom: prev, order: pendingOrder });
      pendingOrder = null;
      return;
    }
    rings.delete(label);
    if (open.atom === prev) {
      throw new InvalidSmilesError(`ring bond ${label} closes on its own atom`);
    }
    if (open.order && pendingOrder && open.order !== pendingOrder) {
      throw new InvalidSmilesError(`conflicting orders for ring bond ${label}`);
    }
    const order =
      open.order ??
      pendingOrder ??
      (atoms[open.atom]!.aromatic && atoms[prev]!.aromatic
        ? "aromatic"
        : "single");
    bonds.push({ a: open.atom, b: prev, order });
    pendingOrder = null;
  };

  while (i < smiles.length) {
    const ch = smiles[i]!;
    if (ch === "[") {
      const end = smiles.indexOf("]", i);
      if (end < 0) throw new InvalidSmilesError("unclosed bracket atom");
      addAtom(parseBracket(smiles.slice(i + 1, end), atoms.length));
      i = end + 1;
    } else if (ch === "(") {
      if (prev < 0) throw new InvalidSmilesError("branch before any atom");
      branchStack.push(prev);
      i += 1;
    } else if (ch === ")") {
      const back = branchStack.pop();
      if (back === undefined) throw new InvalidSmilesError("unmatched ')'");
      prev = back;
      i += 1;
    } else if (ch === "%") {
      const label = smiles.slice(i + 1, i + 3);
      if (!/^\d\d$/.test(label)) {
        throw new InvalidSmilesError("'%' needs two digits");
      }
      closeRing(label);
      i += 3;
    } else if (/\d/.test(ch)) {
      closeRing(ch);
      i += 1;
    } else if ("-=#:/\\".includes(ch)) {
      if (pendingOrder !== null) {
        throw new InvalidSmilesError("two bond symbols in a row");
      }
      pendingOrder = bondSymbolToOrder(ch);
      i += 1;
    } else if (ch === ".") {
      if (pendingOrder !== null) {
        throw new InvalidSmilesError("bond symbol before '.'");
      }
      prev = -1;
      i += 1;
    } else {
      const two = smiles.slice(i, i + 2);
      let symbol: string | null = null;
      if (ORGANIC.includes(two)) symbol = two;
      else if (ORGANIC.includes(ch)) symbol = ch;
      else if (AROMATIC_ORGANIC.includes(ch)) symbol = ch;
      if (symbol === null) {
        throw new InvalidSmilesError(`unexpected character '${ch}' at ${i}`);
      }
      const aromatic = symbol === symbol.toLowerCase();
      const element = aromatic
        ? symbol.charAt(0).toUpperCase() + symbol.slice(1)
        : symbol;
      addAtom({
        index: atoms.length,
        element,
        atomicNumber: ATOMIC_NUMBERS[element]!,
        aromatic,
        charge: 0,
        isotope: 0,
        bracketH: -1,
      });
      i += symbol.length;
    }
  }
  if (pendingOrder !== null) throw new InvalidSmilesError("dangling bond symbol");
  if (branchStack.length > 0) throw new InvalidSmilesError("unclosed branch");
  if (rings.size > 0) {
    const labels = [...rings.keys()].join(", ");
    throw new InvalidSmilesError(`unclosed ring bond(s): ${labels}`);
  }
  if (atoms.length === 0) throw new InvalidSmilesError("no atoms");

  const orderSums = new Array<number>(atoms.length).fill(0);
  for (const bond of bonds) {
    orderSums[bond.a] = orderSums[bond.a]! + BOND_VALUE[bond.order];
    orderSums[bond.b] = orderSums[bond.b]! + BOND_VALUE[bond.order];
  }
  const hydrogens = atoms.map((atom) =>
    implicitHydrogens(atom, orderSums[atom.index]!)
  );
  return { atoms, bonds, hydrogens, inRing: markRingAtoms(atoms.length, bonds) };
}
