/** Forward-only float32 building blocks for the encoder. */

export function matmul(
  a: Float32Array, b: Float32Array, m: number, k: number, n: number,
): Float32Array {
  const out = new Float32Array(m * n);
  for (let i = 0; i < m; i++) {
    for (let p = 0; p < k; p++) {
      const av = a[i * k + p];
      if (av === 0) continue;
      const bRow = p * n;
      const oRow = i * n;
      for (let j = 0; j < n; j++) {
        out[oRow + j] = Math.fround(out[oRow + j] + Math.fround(av * b[bRow + j]));
      }
    }
  }
  return out;
}

export function addBias(x: Float32Array, bias: Float32Array, rows: number, width: number): void {
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < width; c++) {
      x[r * width + c] = Math.fround(x[r * width + c] + bias[c]);
    }
  }
}

export function layerNorm(
  x: Float32Array, gain: Float32Array, bias: Float32Array,
  rows: number, width: number, eps = 1e-5,
): Float32Array {
  const out = new Float32Array(rows * width);
  for (let r = 0; r < rows; r++) {
    const base = r * width;
    let mean = 0;
    for (let c = 0; c < width; c++) mean += x[base + c];
    mean /= width;
    let variance = 0;
    for (let c = 0; c < width; c++) {
      const d = x[base + c] - mean;
      variance += d * d;
    }
    variance /= width;
    const rstd = 1.0 / Math.sqrt(variance + eps);
    for (let c = 0; c < width; c++) {
      out[base + c] = Math.fround((x[base + c] - mean) * rstd * gain[c] + bias[c]);
    }
  }
  return out;
}

const GELU_K0 = 0.7978845608028654; // sqrt(2/pi)
const GELU_K1 = 0.044715;

export function geluInPlace(x: Float32Array): void {
  for (let i = 0; i < x.length; i++) {
    const v = x[i];
    x[i] = Math.fround(0.5 * v * (1 + Math.tanh(GELU_K0 * (v + GELU_K1 * v * v * v))));
  }
}

/** Row softmax with max subtraction, in place. */
export function softmaxRowsInPlace(x: Float32Array, rows: number, width: number): void {
  for (let r = 0; r < rows; r++) {
    const base = r * width;
    let max = -Infinity;
    for (let c = 0; c < width; c++) if (x[base + c] > max) max = x[base + c];
    let sum = 0;
    for (let c = 0; c < width; c++) {
      const e = Math.fround(Math.exp(x[base + c] - max));
      x[base + c] = e;
      sum += e;
    }
    for (let c = 0; c < width; c++) x[base + c] = Math.fround(x[base + c] / sum);
  }
}
