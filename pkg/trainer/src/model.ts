/**
 * The two trainable networks, matching the simulator's forward semantics
 * and weight naming exactly (patch layout, SAME conv padding, pre-norm
 * blocks, tanh GELU, layer-norm eps 1e-5, positional table slicing).
 */

import {
  Tensor,
  add,
  concatCols,
  constant,
  crossEntropyRows,
  gatherPad,
  gelu,
  layerNormRows,
  linear,
  matmul,
  matmulBT,
  param,
  relu,
  reshape,
  scale,
  sliceCols,
  softmaxRows,
} from "./tensor.js";
import { NamedTensor } from "./blwb.js";
import { Rng } from "./rng.js";

export interface VitCfg {
  patch: number;
  dim: number;
  heads: number;
  encBlocks: number;
  decBlocks: number;
  classes: number;
  mlpRatio: number;
  maxGridH: number;
  maxGridW: number;
}

export interface ConvSpec {
  out: number;
  k: number;
  stride: number;
}

export interface RoiCfg {
  h: number;
  w: number;
  inCh: number;
  convs: ConvSpec[];
  fcHidden: number;
}

export type Params = Map<string, { tensor: Tensor; dims: number[] }>;

function addParam(params: Params, name: string, dims: number[], init: () => number): Tensor {
  // parameters live flat; `reshape` shares the buffers at every use site,
  // while `dims` records the on-disk tensor shape
  const flatLen = dims.reduce((a, b) => a * b, 1);
  const t = param([flatLen], init);
  params.set(name, { tensor: t, dims });
  return t;
}

export function initVitParams(cfg: VitCfg, rng: Rng, std = 0.05): Params {
  const p: Params = new Map();
  const d = cfg.dim;
  const hid = d * cfg.mlpRatio;
  const vec = cfg.patch * cfg.patch * 2;
  const g = () => rng.normal(0, std);
  const ones = () => 1;
  const zeros = () => 0;
  addParam(p, "vit.embed.weight", [d, vec], g);
  addParam(p, "vit.embed.bias", [d], g);
  addParam(p, "vit.pos_embed", [cfg.maxGridH, cfg.maxGridW, d], g);
  const blocks: Array<[string, number]> = [
    ["enc", cfg.encBlocks],
    ["dec", cfg.decBlocks],
  ];
  for (const [kind, count] of blocks) {
    for (let i = 0; i < count; i++) {
      const pre = `vit.${kind}${i}`;
      addParam(p, `${pre}.ln1.gamma`, [d], ones);
      addParam(p, `${pre}.ln1.beta`, [d], zeros);
      addParam(p, `${pre}.attn.qkv.weight`, [3 * d, d], g);
      addParam(p, `${pre}.attn.qkv.bias`, [3 * d], g);
      addParam(p, `${pre}.attn.out.weight`, [d, d], g);
      addParam(p, `${pre}.attn.out.bias`, [d], g);
      addParam(p, `${pre}.ln2.gamma`, [d], ones);
      addParam(p, `${pre}.ln2.beta`, [d], zeros);
      addParam(p, `${pre}.mlp.fc0.weight`, [hid, d], g);
      addParam(p, `${pre}.mlp.fc0.bias`, [hid], g);
      addParam(p, `${pre}.mlp.fc1.weight`, [d, hid], g);
      addParam(p, `${pre}.mlp.fc1.bias`, [d], g);
    }
  }
  addParam(p, "vit.final_ln.gamma", [d], ones);
  addParam(p, "vit.final_ln.beta", [d], zeros);
  addParam(p, "vit.head.weight", [cfg.classes, d], g);
  addParam(p, "vit.head.bias", [cfg.classes], g);
  return p;
}

export function initRoiParams(cfg: RoiCfg, rng: Rng, std = 0.05): Params {
  const p: Params = new Map();
  const g = () => rng.normal(0, std);
  let inCh = cfg.inCh;
  let h = cfg.h;
  let w = cfg.w;
  cfg.convs.forEach((spec, i) => {
    addParam(p, `roinet.conv${i}.weight`, [spec.out, inCh, spec.k, spec.k], g);
    addParam(p, `roinet.conv${i}.bias`, [spec.out], g);
    inCh = spec.out;
    h = Math.ceil(h / spec.stride);
    w = Math.ceil(w / spec.stride);
  });
  const flat = inCh * h * w;
  addParam(p, "roinet.fc0.weight", [cfg.fcHidden, flat], g);
  addParam(p, "roinet.fc0.bias", [cfg.fcHidden], g);
  addParam(p, "roinet.fc1.weight", [4, cfg.fcHidden], g);
  addParam(p, "roinet.fc1.bias", [4], g);
  return p;
}

function get(params: Params, name: string): Tensor {
  const entry = params.get(name);
  if (!entry) throw new Error(`missing parameter ${name}`);
  return entry.tensor;
}

function asMatrix(params: Params, name: string, rows: number, cols: number): Tensor {
  return reshape(get(params, name), [rows, cols]);
}

function asBias(params: Params, name: string, n: number): Tensor {
  return reshape(get(params, name), [n, 1]);
}

/** One pre-norm transformer block: x + MHA(LN(x)), then x + MLP(LN(x)). */
function block(x: Tensor, params: Params, prefix: string, cfg: VitCfg): Tensor {
  const d = cfg.dim;
  const hd = d / cfg.heads;
  const n = x.shape[0];
  const normed = layerNormRows(
    x,
    reshape(get(params, `${prefix}.ln1.gamma`), [d]),
    reshape(get(params, `${prefix}.ln1.beta`), [d]),
  );
  const qkv = linear(
    normed,
    asMatrix(params, `${prefix}.attn.qkv.weight`, 3 * d, d),
    reshape(get(params, `${prefix}.attn.qkv.bias`), [3 * d]),
  );
  const heads: Tensor[] = [];
  for (let h = 0; h < cfg.heads; h++) {
    const q = sliceCols(qkv, h * hd, (h + 1) * hd);
    const k = sliceCols(qkv, d + h * hd, d + (h + 1) * hd);
    const v = sliceCols(qkv, 2 * d + h * hd, 2 * d + (h + 1) * hd);
    const scores = scale(matmulBT(q, k), 1 / Math.sqrt(hd));
    const attn = softmaxRows(scores);
    heads.push(matmul(attn, v));
  }
  const merged = concatCols(heads);
  const attnOut = linear(
    merged,
    asMatrix(params, `${prefix}.attn.out.weight`, d, d),
    reshape(get(params, `${prefix}.attn.out.bias`), [d]),
  );
  let y = add(x, attnOut);
  const normed2 = layerNormRows(
    y,
    reshape(get(params, `${prefix}.ln2.gamma`), [d]),
    reshape(get(params, `${prefix}.ln2.beta`), [d]),
  );
  const hid = gelu(
    linear(
      normed2,
      asMatrix(params, `${prefix}.mlp.fc0.weight`, d * cfg.mlpRatio, d),
      reshape(get(params, `${prefix}.mlp.fc0.bias`), [d * cfg.mlpRatio]),
    ),
  );
  const mlpOut = linear(
    hid,
    asMatrix(params, `${prefix}.mlp.fc1.weight`, d, d * cfg.mlpRatio),
    reshape(get(params, `${prefix}.mlp.fc1.bias`), [d]),
  );
  return add(y, mlpOut);
}

/** Patchify indices into a stacked [2, H, W] buffer; -1 pads with zero. */
export function patchIndices(h: number, w: number, patch: number): { idx: Int32Array; gh: number; gw: number } {
  const gh = Math.ceil(h / patch);
  const gw = Math.ceil(w / patch);
  const idx = new Int32Array(gh * gw * patch * patch * 2);
  let o = 0;
  for (let ty = 0; ty < gh; ty++)
    for (let tx = 0; tx < gw; tx++)
      for (let py = 0; py < patch; py++)
        for (let px = 0; px < patch; px++)
          for (let c = 0; c < 2; c++) {
            const y = ty * patch + py;
            const x = tx * patch + px;
            idx[o++] = y < h && x < w ? c * h * w + y * w + x : -1;
          }
  return { idx, gh, gw };
}

/**
 * ViT forward to per-patch class logits.
 * `stacked` holds [values, validity] flattened as [2, H, W].
 */
export function vitForward(
  stacked: Tensor,
  h: number,
  w: number,
  params: Params,
  cfg: VitCfg,
): { logits: Tensor; gh: number; gw: number } {
  const { idx, gh, gw } = patchIndices(h, w, cfg.patch);
  if (gh > cfg.maxGridH || gw > cfg.maxGridW) throw new Error("token grid exceeds positional table");
  const n = gh * gw;
  const vec = cfg.patch * cfg.patch * 2;
  const tokens = gatherPad(stacked, idx, [n, vec]);
  const d = cfg.dim;
  let x = linear(
    tokens,
    asMatrix(params, "vit.embed.weight", d, vec),
    reshape(get(params, "vit.embed.bias"), [d]),
  );
  // positional slice [0:gh, 0:gw] out of the stored grid
  const posIdx = new Int32Array(n * d);
  let o = 0;
  for (let ty = 0; ty < gh; ty++)
    for (let tx = 0; tx < gw; tx++)
      for (let j = 0; j < d; j++) posIdx[o++] = (ty * cfg.maxGridW + tx) * d + j;
  const pos = gatherPad(get(params, "vit.pos_embed"), posIdx, [n, d]);
  x = add(x, pos);
  for (let i = 0; i < cfg.encBlocks; i++) x = block(x, params, `vit.enc${i}`, cfg);
  for (let i = 0; i < cfg.decBlocks; i++) x = block(x, params, `vit.dec${i}`, cfg);
  x = layerNormRows(
    x,
    reshape(get(params, "vit.final_ln.gamma"), [d]),
    reshape(get(params, "vit.final_ln.beta"), [d]),
  );
  const logits = linear(
    x,
    asMatrix(params, "vit.head.weight", cfg.classes, d),
    reshape(get(params, "vit.head.bias"), [cfg.classes]),
  );
  return { logits, gh, gw };
}

/** SAME-pad im2col indices for one conv layer over [C, H, W]. */
function convIndices(c: number, h: number, w: number, k: number, stride: number): { idx: Int32Array; oh: number; ow: number } {
  const oh = Math.ceil(h / stride);
  const ow = Math.ceil(w / stride);
  const padH = Math.max((oh - 1) * stride + k - h, 0);
  const padW = Math.max((ow - 1) * stride + k - w, 0);
  const pt = Math.floor(padH / 2);
  const pl = Math.floor(padW / 2);
  const idx = new Int32Array(c * k * k * oh * ow);
  let o = 0;
  for (let ci = 0; ci < c; ci++)
    for (let ky = 0; ky < k; ky++)
      for (let kx = 0; kx < k; kx++)
        for (let oy = 0; oy < oh; oy++)
          for (let ox = 0; ox < ow; ox++) {
            const y = oy * stride + ky - pt;
            const x = ox * stride + kx - pl;
            idx[o++] = y >= 0 && y < h && x >= 0 && x < w ? ci * h * w + y * w + x : -1;
          }
  return { idx, oh, ow };
}

function addBiasRows(x: Tensor, bias: Tensor): Tensor {
  // x: [m, n], bias stored [m, 1] -> broadcast over columns via matmul trick
  const [m, n] = x.shape;
  const onesRow = constant([1, n], new Float64Array(n).fill(1));
  return add(x, matmul(reshape(bias, [m, 1]), onesRow));
}

/** ROI network forward: stacked [inCh, H, W] input -> 4 raw coordinates. */
export function roiForward(x: Tensor, params: Params, cfg: RoiCfg): Tensor {
  let feat = x;
  let c = cfg.inCh;
  let h = cfg.h;
  let w = cfg.w;
  cfg.convs.forEach((spec, i) => {
    const { idx, oh, ow } = convIndices(c, h, w, spec.k, spec.stride);
    const cols = gatherPad(feat, idx, [c * spec.k * spec.k, oh * ow]);
    const weight = asMatrix(params, `roinet.conv${i}.weight`, spec.out, c * spec.k * spec.k);
    const bias = asBias(params, `roinet.conv${i}.bias`, spec.out);
    feat = relu(addBiasRows(matmul(weight, cols), bias));
    c = spec.out;
    h = oh;
    w = ow;
  });
  const flat = reshape(feat, [1, c * h * w]);
  const hidden = relu(
    linear(
      flat,
      asMatrix(params, "roinet.fc0.weight", cfg.fcHidden, c * h * w),
      reshape(get(params, "roinet.fc0.bias"), [cfg.fcHidden]),
    ),
  );
  const outRow = linear(
    hidden,
    asMatrix(params, "roinet.fc1.weight", 4, cfg.fcHidden),
    reshape(get(params, "roinet.fc1.bias"), [4]),
  );
  return reshape(outRow, [4]);
}

export function paramsToTensors(params: Params): NamedTensor[] {
  const out: NamedTensor[] = [];
  for (const [name, { tensor, dims }] of params) {
    out.push({ name, dims, data: Float32Array.from(tensor.data) });
  }
  return out;
}

export function loadParams(tensors: NamedTensor[]): Params {
  const params: Params = new Map();
  for (const t of tensors) {
    const flat = new Tensor([t.data.length, 1], Float64Array.from(t.data), true);
    params.set(t.name, { tensor: flat, dims: t.dims });
  }
  return params;
}

export { crossEntropyRows };
