/** Deterministic PRNG for weight generation (splitmix32 core). */

export function splitmix32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    z = z ^ (z >>> 15);
    return (z >>> 0) / 4294967296;
  };
}

/**
 * Approximately standard-normal draws via Irwin-Hall (sum of 12 uniforms).
 * Avoids transcendental functions so streams are bit-stable everywhere.
 */
export function gaussian(seed: number): () => number {
  const next = splitmix32(seed);
  return () => {
    let acc = -6.0;
    for (let i = 0; i < 12; i++) acc += next();
    return acc;
  };
}
