// mulberry32: tiny deterministic PRNG, good enough for column subsampling

export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** uniform float in [0, 1) */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** integer in [0, bound) */
  nextInt(bound: number): number {
    return Math.floor(this.next() * bound);
  }

  /** k distinct integers from [0, n), ascending */
  sampleDistinct(n: number, k: number): number[] {
    if (k >= n) return Array.from({ length: n }, (_, i) => i);
    // partial Fisher-Yates over an index pool
    const pool = Array.from({ length: n }, (_, i) => i);
    for (let i = 0; i < k; i++) {
      const j = i + this.nextInt(n - i);
      const tmp = pool[i]!;
      pool[i] = pool[j]!;
      pool[j] = tmp;
    }
    return pool.slice(0, k).sort((a, b) => a - b);
  }
}
