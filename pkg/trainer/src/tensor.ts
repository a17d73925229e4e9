/**
 * Minimal reverse-mode autograd over flat Float64Arrays.
 *
 * Ops record backward closures on a module-level tape; `backward(loss)`
 * seeds d(loss)=1 and replays the tape in reverse. Parameters keep their
 * grad buffers across steps (the optimizer zeroes them); call `resetTape`
 * at the start of every training step.
 */

export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null;

  constructor(shape: number[], data?: Float64Array, requiresGrad = false) {
    this.shape = shape;
    const n = shape.reduce((a, b) => a * b, 1);
    this.data = data ?? new Float64Array(n);
    if (data && data.length !== n) throw new Error(`data length ${data.length} != shape ${shape}`);
    this.grad = requiresGrad ? new Float64Array(n) : null;
  }

  get size(): number {
    return this.data.length;
  }
}

let tape: Array<() => void> = [];

export function resetTape(): void {
  tape = [];
}

export function backward(loss: Tensor): void {
  if (loss.size !== 1) throw new Error("backward expects a scalar loss");
  if (!loss.grad) throw new Error("loss does not require grad");
  loss.grad[0] = 1.0;
  for (let i = tape.length - 1; i >= 0; i--) tape[i]();
}

export function constant(shape: number[], data: Float64Array | number[]): Tensor {
  return new Tensor(shape, Float64Array.from(data), false);
}

export function param(shape: number[], init: () => number): Tensor {
  const t = new Tensor(shape, undefined, true);
  // store at float32 precision so the exported bundle reproduces the model
  for (let i = 0; i < t.size; i++) t.data[i] = Math.fround(init());
  return t;
}

function out(shape: number[]): Tensor {
  return new Tensor(shape, undefined, true);
}

/** y = x @ W^T + b, x: [n, din], W: [dout, din], b: [dout]. */
export function linear(x: Tensor, w: Tensor, b: Tensor): Tensor {
  const [n, din] = x.shape;
  const [dout, din2] = w.shape;
  if (din !== din2) throw new Error(`linear: ${din} vs ${din2}`);
  const y = out([n, dout]);
  for (let i = 0; i < n; i++) {
    for (let o = 0; o < dout; o++) {
      let acc = b.data[o];
      for (let k = 0; k < din; k++) acc += x.data[i * din + k] * w.data[o * din + k];
      y.data[i * dout + o] = acc;
    }
  }
  tape.push(() => {
    const dy = y.grad!;
    for (let i = 0; i < n; i++) {
      for (let o = 0; o < dout; o++) {
        const g = dy[i * dout + o];
        if (g === 0) continue;
        if (x.grad) for (let k = 0; k < din; k++) x.grad[i * din + k] += g * w.data[o * din + k];
        if (w.grad) for (let k = 0; k < din; k++) w.grad[o * din + k] += g * x.data[i * din + k];
        if (b.grad) b.grad[o] += g;
      }
    }
  });
  return y;
}

/** c = a @ b, a: [m, k], b: [k, n]. */
export function matmul(a: Tensor, b: Tensor): Tensor {
  const [m, k] = a.shape;
  const [k2, n] = b.shape;
  if (k !== k2) throw new Error(`matmul: ${k} vs ${k2}`);
  const c = out([m, n]);
  for (let i = 0; i < m; i++)
    for (let p = 0; p < k; p++) {
      const av = a.data[i * k + p];
      if (av === 0) continue;
      for (let j = 0; j < n; j++) c.data[i * n + j] += av * b.data[p * n + j];
    }
  tape.push(() => {
    const dc = c.grad!;
    if (a.grad)
      for (let i = 0; i < m; i++)
        for (let j = 0; j < n; j++) {
          const g = dc[i * n + j];
          if (g === 0) continue;
          for (let p = 0; p < k; p++) a.grad[i * k + p] += g * b.data[p * n + j];
        }
    if (b.grad)
      for (let i = 0; i < m; i++)
        for (let p = 0; p < k; p++) {
          const av = a.data[i * k + p];
          if (av === 0) continue;
          for (let j = 0; j < n; j++) b.grad[p * n + j] += dc[i * n + j] * av;
        }
  });
  return c;
}

/** c = a @ b^T, a: [m, k], b: [n, k]. */
export function matmulBT(a: Tensor, b: Tensor): Tensor {
  const [m, k] = a.shape;
  const [n, k2] = b.shape;
  if (k !== k2) throw new Error(`matmulBT: ${k} vs ${k2}`);
  const c = out([m, n]);
  for (let i = 0; i < m; i++)
    for (let j = 0; j < n; j++) {
      let acc = 0;
      for (let p = 0; p < k; p++) acc += a.data[i * k + p] * b.data[j * k + p];
      c.data[i * n + j] = acc;
    }
  tape.push(() => {
    const dc = c.grad!;
    for (let i = 0; i < m; i++)
      for (let j = 0; j < n; j++) {
        const g = dc[i * n + j];
        if (g === 0) continue;
        if (a.grad) for (let p = 0; p < k; p++) a.grad[i * k + p] += g * b.data[j * k + p];
        if (b.grad) for (let p = 0; p < k; p++) b.grad[j * k + p] += g * a.data[i * k + p];
      }
  });
  return c;
}

function unaryOp(x: Tensor, f: (v: number) => number, df: (v: number, y: number) => number): Tensor {
  const y = out(x.shape.slice());
  for (let i = 0; i < x.size; i++) y.data[i] = f(x.data[i]);
  tape.push(() => {
    if (!x.grad) return;
    for (let i = 0; i < x.size; i++) x.grad[i] += y.grad![i] * df(x.data[i], y.data[i]);
  });
  return y;
}

export function relu(x: Tensor): Tensor {
  return unaryOp(x, (v) => (v > 0 ? v : 0), (v) => (v > 0 ? 1 : 0));
}

const GELU_C = Math.sqrt(2.0 / Math.PI);

export function gelu(x: Tensor): Tensor {
  return unaryOp(
    x,
    (v) => 0.5 * v * (1 + Math.tanh(GELU_C * (v + 0.044715 * v ** 3))),
    (v) => {
      const inner = GELU_C * (v + 0.044715 * v ** 3);
      const t = Math.tanh(inner);
      const dInner = GELU_C * (1 + 3 * 0.044715 * v * v);
      return 0.5 * (1 + t) + 0.5 * v * (1 - t * t) * dInner;
    },
  );
}

export function sigmoid(x: Tensor): Tensor {
  return unaryOp(x, (v) => 1 / (1 + Math.exp(-v)), (_v, y) => y * (1 - y));
}

export function scale(x: Tensor, c: number): Tensor {
  return unaryOp(x, (v) => v * c, () => c);
}

function binaryOp(
  a: Tensor,
  b: Tensor,
  f: (x: number, y: number) => number,
  dfa: (x: number, y: number) => number,
  dfb: (x: number, y: number) => number,
): Tensor {
  if (a.size !== b.size) throw new Error(`elementwise op: ${a.size} vs ${b.size}`);
  const y = out(a.shape.slice());
  for (let i = 0; i < a.size; i++) y.data[i] = f(a.data[i], b.data[i]);
  tape.push(() => {
    for (let i = 0; i < a.size; i++) {
      const g = y.grad![i];
      if (a.grad) a.grad[i] += g * dfa(a.data[i], b.data[i]);
      if (b.grad) b.grad[i] += g * dfb(a.data[i], b.data[i]);
    }
  });
  return y;
}

export function add(a: Tensor, b: Tensor): Tensor {
  return binaryOp(a, b, (x, y) => x + y, () => 1, () => 1);
}

export function sub(a: Tensor, b: Tensor): Tensor {
  return binaryOp(a, b, (x, y) => x - y, () => 1, () => -1);
}

export function mul(a: Tensor, b: Tensor): Tensor {
  return binaryOp(a, b, (x, y) => x * y, (_x, y) => y, (x) => x);
}

/** Broadcast a scalar tensor (size 1) to `shape`; backward sums. */
export function expand(s: Tensor, shape: number[]): Tensor {
  if (s.size !== 1) throw new Error("expand needs a scalar tensor");
  const y = out(shape);
  y.data.fill(s.data[0]);
  tape.push(() => {
    if (!s.grad) return;
    let acc = 0;
    for (let i = 0; i < y.size; i++) acc += y.grad![i];
    s.grad[0] += acc;
  });
  return y;
}

/** Extract element i of a vector as a scalar tensor. */
export function pick(x: Tensor, i: number): Tensor {
  const y = out([1]);
  y.data[0] = x.data[i];
  tape.push(() => {
    if (x.grad) x.grad[i] += y.grad![0];
  });
  return y;
}

/** Detach: value copy with no gradient path. */
export function stopGrad(x: Tensor): Tensor {
  return new Tensor(x.shape.slice(), Float64Array.from(x.data), false);
}

/** Identity forward; backward multiplies the incoming gradient by mask. */
export function gradMask(x: Tensor, mask: Float64Array): Tensor {
  if (mask.length !== x.size) throw new Error("gradMask: size mismatch");
  const y = out(x.shape.slice());
  y.data.set(x.data);
  tape.push(() => {
    if (!x.grad) return;
    for (let i = 0; i < x.size; i++) x.grad[i] += y.grad![i] * mask[i];
  });
  return y;
}

/** Zero-copy reshape: shares data and grad buffers. */
export function reshape(x: Tensor, shape: number[]): Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  if (n !== x.size) throw new Error(`reshape: ${x.size} -> ${shape}`);
  const y = new Tensor(shape, x.data, false);
  y.grad = x.grad;
  return y;
}

/** Gather with -1 meaning a padded zero; backward scatter-adds. */
export function gatherPad(x: Tensor, indices: Int32Array, shape: number[]): Tensor {
  const y = out(shape);
  for (let i = 0; i < indices.length; i++) {
    const src = indices[i];
    y.data[i] = src >= 0 ? x.data[src] : 0;
  }
  tape.push(() => {
    if (!x.grad) return;
    for (let i = 0; i < indices.length; i++) {
      const src = indices[i];
      if (src >= 0) x.grad[src] += y.grad![i];
    }
  });
  return y;
}

/** Concatenate [n, w_i] blocks along columns. */
export function concatCols(parts: Tensor[]): Tensor {
  const n = parts[0].shape[0];
  const widths = parts.map((p) => p.shape[1]);
  const total = widths.reduce((a, b) => a + b, 0);
  const y = out([n, total]);
  let offset = 0;
  for (const [pi, p] of parts.entries()) {
    const w = widths[pi];
    for (let i = 0; i < n; i++)
      for (let j = 0; j < w; j++) y.data[i * total + offset + j] = p.data[i * w + j];
    offset += w;
  }
  tape.push(() => {
    let off = 0;
    for (const [pi, p] of parts.entries()) {
      const w = widths[pi];
      if (p.grad)
        for (let i = 0; i < n; i++)
          for (let j = 0; j < w; j++) p.grad[i * w + j] += y.grad![i * total + off + j];
      off += w;
    }
  });
  return y;
}

/** Columns [from, to) of a [n, m] tensor. */
export function sliceCols(x: Tensor, from: number, to: number): Tensor {
  const [n, m] = x.shape;
  const w = to - from;
  const y = out([n, w]);
  for (let i = 0; i < n; i++)
    for (let j = 0; j < w; j++) y.data[i * w + j] = x.data[i * m + from + j];
  tape.push(() => {
    if (!x.grad) return;
    for (let i = 0; i < n; i++)
      for (let j = 0; j < w; j++) x.grad[i * m + from + j] += y.grad![i * w + j];
  });
  return y;
}

/** Row-wise softmax of [n, m]. */
export function softmaxRows(x: Tensor): Tensor {
  const [n, m] = x.shape;
  const y = out([n, m]);
  for (let i = 0; i < n; i++) {
    let mx = -Infinity;
    for (let j = 0; j < m; j++) mx = Math.max(mx, x.data[i * m + j]);
    let sum = 0;
    for (let j = 0; j < m; j++) {
      const e = Math.exp(x.data[i * m + j] - mx);
      y.data[i * m + j] = e;
      sum += e;
    }
    for (let j = 0; j < m; j++) y.data[i * m + j] /= sum;
  }
  tape.push(() => {
    if (!x.grad) return;
    for (let i = 0; i < n; i++) {
      let dot = 0;
      for (let j = 0; j < m; j++) dot += y.grad![i * m + j] * y.data[i * m + j];
      for (let j = 0; j < m; j++)
        x.grad[i * m + j] += y.data[i * m + j] * (y.grad![i * m + j] - dot);
    }
  });
  return y;
}

const LN_EPS = 1e-5;

/** Row-wise layer norm of [n, d] with per-feature gamma/beta. */
export function layerNormRows(x: Tensor, gamma: Tensor, beta: Tensor): Tensor {
  const [n, d] = x.shape;
  const y = out([n, d]);
  const means = new Float64Array(n);
  const invStds = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    let mu = 0;
    for (let j = 0; j < d; j++) mu += x.data[i * d + j];
    mu /= d;
    let v = 0;
    for (let j = 0; j < d; j++) v += (x.data[i * d + j] - mu) ** 2;
    v /= d;
    const inv = 1 / Math.sqrt(v + LN_EPS);
    means[i] = mu;
    invStds[i] = inv;
    for (let j = 0; j < d; j++)
      y.data[i * d + j] = (x.data[i * d + j] - mu) * inv * gamma.data[j] + beta.data[j];
  }
  tape.push(() => {
    for (let i = 0; i < n; i++) {
      const inv = invStds[i];
      let sumG = 0;
      let sumGX = 0;
      for (let j = 0; j < d; j++) {
        const xhat = (x.data[i * d + j] - means[i]) * inv;
        const gy = y.grad![i * d + j];
        if (gamma.grad) gamma.grad[j] += gy * xhat;
        if (beta.grad) beta.grad[j] += gy;
        const gxhat = gy * gamma.data[j];
        sumG += gxhat;
        sumGX += gxhat * xhat;
      }
      if (x.grad)
        for (let j = 0; j < d; j++) {
          const xhat = (x.data[i * d + j] - means[i]) * inv;
          const gxhat = y.grad![i * d + j] * gamma.data[j];
          x.grad[i * d + j] += inv * (gxhat - sumG / d - (xhat * sumGX) / d);
        }
    }
  });
  return y;
}

/** Mean cross-entropy of [n, c] logits against integer labels. */
export function crossEntropyRows(logits: Tensor, labels: Int32Array): Tensor {
  const [n, c] = logits.shape;
  if (labels.length !== n) throw new Error("crossEntropy: label count mismatch");
  const y = out([1]);
  const probs = new Float64Array(n * c);
  let total = 0;
  for (let i = 0; i < n; i++) {
    let mx = -Infinity;
    for (let j = 0; j < c; j++) mx = Math.max(mx, logits.data[i * c + j]);
    let sum = 0;
    for (let j = 0; j < c; j++) {
      const e = Math.exp(logits.data[i * c + j] - mx);
      probs[i * c + j] = e;
      sum += e;
    }
    for (let j = 0; j < c; j++) probs[i * c + j] /= sum;
    total += -Math.log(Math.max(probs[i * c + labels[i]], 1e-300));
  }
  y.data[0] = total / n;
  tape.push(() => {
    if (!logits.grad) return;
    const g = y.grad![0] / n;
    for (let i = 0; i < n; i++)
      for (let j = 0; j < c; j++)
        logits.grad[i * c + j] += g * (probs[i * c + j] - (labels[i] === j ? 1 : 0));
  });
  return y;
}

/** Mean squared error against a constant target. */
export function mseLoss(pred: Tensor, target: Float64Array | number[]): Tensor {
  const t = Float64Array.from(target);
  if (t.length !== pred.size) throw new Error("mse: size mismatch");
  const y = out([1]);
  let acc = 0;
  for (let i = 0; i < pred.size; i++) acc += (pred.data[i] - t[i]) ** 2;
  y.data[0] = acc / pred.size;
  tape.push(() => {
    if (!pred.grad) return;
    const g = (2 * y.grad![0]) / pred.size;
    for (let i = 0; i < pred.size; i++) pred.grad[i] += g * (pred.data[i] - t[i]);
  });
  return y;
}

/** Standalone gradient mask: entries at unsampled positions become exactly 0. */
export function maskGradients(grads: Float64Array, mask: ArrayLike<number>): Float64Array {
  if (grads.length !== mask.length) throw new Error("maskGradients: shape mismatch");
  const outArr = Float64Array.from(grads);
  for (let i = 0; i < outArr.length; i++) if (!mask[i]) outArr[i] = 0;
  return outArr;
}
