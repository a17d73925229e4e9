/**
 * Joint training of the ROI network and the sparse segmentation
 * transformer.
 *
 * Loss: cross-entropy over per-patch class labels plus lambda times the
 * mean-square error of the predicted ROI box (normalized coordinates).
 *
 * The sampling step is made (approximately) differentiable with a
 * straight-through estimator: the forward pass applies the hard per-pixel
 * sampling mask (random bits AND the hard predicted box), the backward
 * pass flows through a sigmoid-relaxed box mask, and the random bits
 * multiply both paths so gradients at unsampled pixels are exactly zero.
 * An explicit gradient mask on the sparse input enforces the same
 * guarantee structurally.
 */

import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { writeBundle } from "./blwb.js";
import { Sample, TOY_SCENE, ToySceneCfg, makeDataset } from "./data.js";
import {
  Params,
  RoiCfg,
  VitCfg,
  initRoiParams,
  initVitParams,
  paramsToTensors,
  roiForward,
  vitForward,
} from "./model.js";
import { Rng } from "./rng.js";
import {
  Tensor,
  add,
  backward,
  concatCols,
  constant,
  crossEntropyRows,
  expand,
  gradMask,
  mseLoss,
  mul,
  pick,
  reshape,
  resetTape,
  scale,
  sigmoid,
  stopGrad,
  sub,
} from "./tensor.js";

export interface TrainConfig {
  steps: number; // toy-scale override of the epoch schedule below
  lr: number;
  lambda: number; // ROI-loss weight
  seed: number;
  sampleRate: number; // in-box random sampling rate
  tau: number; // soft box mask temperature, pixels
  segBatchSize: number; // full-scale defaults, recorded for reference
  segEpochs: number;
  roiBatchSize: number;
  roiEpochs: number;
  scene: ToySceneCfg;
  vit: VitCfg;
  roi: RoiCfg;
}

export const TOY_TRAIN: TrainConfig = {
  steps: 100,
  lr: 6e-3,
  lambda: 1.0,
  seed: 7,
  sampleRate: 0.35,
  tau: 1.5,
  segBatchSize: 4,
  segEpochs: 250,
  roiBatchSize: 8,
  roiEpochs: 100,
  scene: TOY_SCENE,
  vit: {
    patch: 8,
    dim: 16,
    heads: 2,
    encBlocks: 2,
    decBlocks: 1,
    classes: 4,
    mlpRatio: 2,
    maxGridH: 4,
    maxGridW: 4,
  },
  roi: {
    h: 32,
    w: 32,
    inCh: 2,
    convs: [
      { out: 4, k: 3, stride: 2 },
      { out: 8, k: 3, stride: 2 },
      { out: 8, k: 3, stride: 2 },
    ],
    fcHidden: 32,
  },
};

class Adam {
  private m: Map<Tensor, Float64Array> = new Map();
  private v: Map<Tensor, Float64Array> = new Map();
  private t = 0;

  constructor(
    private params: Tensor[],
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    for (const p of params) {
      this.m.set(p, new Float64Array(p.size));
      this.v.set(p, new Float64Array(p.size));
    }
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - this.beta1 ** this.t;
    const c2 = 1 - this.beta2 ** this.t;
    for (const p of this.params) {
      const g = p.grad!;
      const m = this.m.get(p)!;
      const v = this.v.get(p)!;
      for (let i = 0; i < p.size; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        p.data[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
      g.fill(0);
    }
  }
}

export interface StepResult {
  ce: number;
  mse: number;
  total: number;
  roiGradNorm: number;
  sparseInputGrad: Float64Array; // gradient on the sparse values after masking
  sampleBits: Float64Array; // the random per-pixel selection
  hardMask: Float64Array; // bits AND the hard predicted box (pixels read out)
}

/** Soft in-box weight per pixel from the four predicted coordinates. */
function softBoxMask(coords: Tensor, h: number, w: number, tau: number): Tensor {
  const xs = new Float64Array(h * w);
  const ys = new Float64Array(h * w);
  for (let y = 0; y < h; y++)
    for (let x = 0; x < w; x++) {
      xs[y * w + x] = x;
      ys[y * w + x] = y;
    }
  const xc = constant([h * w], xs);
  const yc = constant([h * w], ys);
  const x1 = expand(scale(pick(coords, 0), w - 1), [h * w]);
  const y1 = expand(scale(pick(coords, 1), h - 1), [h * w]);
  const x2 = expand(scale(pick(coords, 2), w - 1), [h * w]);
  const y2 = expand(scale(pick(coords, 3), h - 1), [h * w]);
  const inv = 1 / tau;
  const left = sigmoid(scale(sub(xc, x1), inv));
  const right = sigmoid(scale(sub(x2, xc), inv));
  const top = sigmoid(scale(sub(yc, y1), inv));
  const bottom = sigmoid(scale(sub(y2, yc), inv));
  return mul(mul(left, right), mul(top, bottom));
}

export function trainStep(
  sample: Sample,
  roiParams: Params,
  vitParams: Params,
  cfg: TrainConfig,
  rng: Rng,
): StepResult {
  resetTape();
  const { h, w } = cfg.scene;
  const n = h * w;

  // ROI prediction from the event map plus the previous segmentation cue
  const roiInput = new Float64Array(2 * n);
  roiInput.set(sample.events, 0);
  roiInput.set(sample.prevSeg, n);
  const coords = roiForward(constant([2 * n], roiInput), roiParams, cfg.roi);
  const boxLoss = mseLoss(coords, sample.trueBox);

  // per-pixel random sampling bits (the hard mask) and the hard box readout
  const bits = new Float64Array(n);
  for (let i = 0; i < n; i++) bits[i] = rng.next() < cfg.sampleRate ? 1 : 0;
  const c = coords.data;
  const hardBox = new Float64Array(n);
  const hardMask = new Float64Array(n);
  for (let y = 0; y < h; y++)
    for (let x = 0; x < w; x++) {
      const inBox =
        x >= Math.round(c[0] * (w - 1)) &&
        x <= Math.round(c[2] * (w - 1)) &&
        y >= Math.round(c[1] * (h - 1)) &&
        y <= Math.round(c[3] * (h - 1));
      hardBox[y * w + x] = inBox ? 1 : 0;
      hardMask[y * w + x] = inBox && bits[y * w + x] ? 1 : 0;
    }

  // straight-through on the hard sampling bits, sigmoid-relaxed box:
  // the forward value is bits AND hard box; the backward path sees the soft
  // box, so box-edge gradients survive, while multiplying by the bits (and
  // the explicit gradient mask) zeroes every unsampled pixel exactly
  const softBox = softBoxMask(coords, h, w, cfg.tau);
  const stBox = add(softBox, stopGrad(sub(constant([n], hardBox), softBox)));
  const effective = mul(constant([n], bits), stBox);

  const frame = constant([n], sample.frame);
  const sparseValues = mul(frame, effective);
  const validity = effective;
  const stacked = reshape(
    concatCols([
      reshape(gradMask(sparseValues, bits), [1, n]),
      reshape(gradMask(validity, bits), [1, n]),
    ]),
    [2 * n],
  );

  const { logits } = vitForward(stacked, h, w, vitParams, cfg.vit);
  const ce = crossEntropyRows(logits, sample.patchLabels);
  const total = add(ce, scale(boxLoss, cfg.lambda));
  backward(total);

  let roiGradNorm = 0;
  for (const { tensor } of roiParams.values())
    for (let i = 0; i < tensor.size; i++) roiGradNorm += tensor.grad![i] ** 2;

  return {
    ce: ce.data[0],
    mse: boxLoss.data[0],
    total: total.data[0],
    roiGradNorm: Math.sqrt(roiGradNorm),
    sparseInputGrad: Float64Array.from(sparseValues.grad!),
    sampleBits: bits,
    hardMask,
  };
}

export interface TrainResult {
  losses: StepResult[];
  roiParams: Params;
  vitParams: Params;
}

export function jointTrain(
  cfg: TrainConfig,
  onStep?: (step: number, r: StepResult) => void,
): TrainResult {
  if (cfg.segBatchSize < 1 || cfg.roiBatchSize < 1) throw new Error("batch size must be >= 1");
  if (cfg.segEpochs < 1 || cfg.roiEpochs < 1) throw new Error("epochs must be >= 1");
  const initRng = new Rng(cfg.seed);
  const roiParams = initRoiParams(cfg.roi, initRng, 0.08);
  const vitParams = initVitParams(cfg.vit, initRng, 0.08);
  const dataset = makeDataset(cfg.scene, 24, cfg.vit.patch, cfg.seed + 1);
  const sampleRng = new Rng(cfg.seed + 2);
  const allParams = [
    ...[...roiParams.values()].map((e) => e.tensor),
    ...[...vitParams.values()].map((e) => e.tensor),
  ];
  const opt = new Adam(allParams, cfg.lr);
  const losses: StepResult[] = [];
  for (let step = 0; step < cfg.steps; step++) {
    const sample = dataset[step % dataset.length];
    const result = trainStep(sample, roiParams, vitParams, cfg, sampleRng);
    if (!Number.isFinite(result.total)) throw new Error(`NaN loss at step ${step}`);
    opt.step();
    losses.push(result);
    onStep?.(step, result);
  }
  return { losses, roiParams, vitParams };
}

export function exportArtifacts(result: TrainResult, bundlePath: string, lossCsvPath: string): void {
  mkdirSync(dirname(bundlePath), { recursive: true });
  const tensors = [...paramsToTensors(result.roiParams), ...paramsToTensors(result.vitParams)];
  // atomic export: write a temp file, then rename into place
  const tmp = `${bundlePath}.tmp`;
  writeFileSync(tmp, writeBundle(tensors));
  renameSync(tmp, bundlePath);
  let csv = "step,ce_seg,mse_roi,total\n";
  result.losses.forEach((l, i) => {
    csv += `${i},${l.ce},${l.mse},${l.total}\n`;
  });
  writeFileSync(lossCsvPath, csv);
}
