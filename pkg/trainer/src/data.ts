/**
 * Toy near-eye scenes for harness training: concentric discs (pupil, iris,
 * sclera) over a static textured background, values normalized to [0, 1].
 * Ground truth per frame: pixel class labels, per-patch majority labels,
 * the iris bounding box in normalized coordinates, and the event map
 * against the previous frame.
 */

import { Rng } from "./rng.js";

export interface ToySceneCfg {
  h: number;
  w: number;
  pupilR: number;
  irisR: number;
  eyeR: number;
  bgLevel: number;
  scleraLevel: number;
  irisLevel: number;
  pupilLevel: number;
  sigma: number; // event threshold on normalized values
}

export const TOY_SCENE: ToySceneCfg = {
  h: 32,
  w: 32,
  pupilR: 3.5,
  irisR: 7.5,
  eyeR: 13.5,
  bgLevel: 0.22,
  scleraLevel: 0.62,
  irisLevel: 0.38,
  pupilLevel: 0.08,
  sigma: 0.09,
};

export interface Sample {
  frame: Float64Array; // current frame values [h*w]
  events: Float64Array; // 0/1 event bits [h*w]
  prevSeg: Float64Array; // previous labels / 3 [h*w]
  labels: Uint8Array; // per-pixel class of the current frame
  patchLabels: Int32Array; // majority class per patch
  trueBox: Float64Array; // normalized [x1, y1, x2, y2] of the iris disc
}

function coverage(d: number, r: number): number {
  return Math.min(Math.max(r - d + 0.5, 0), 1);
}

export function renderFrame(cfg: ToySceneCfg, cx: number, cy: number, background: Float64Array): Float64Array {
  const { h, w } = cfg;
  const out = new Float64Array(h * w);
  const ecx = (w - 1) / 2;
  const ecy = (h - 1) / 2;
  for (let y = 0; y < h; y++)
    for (let x = 0; x < w; x++) {
      const i = y * w + x;
      const dEye = Math.hypot(x - ecx, y - ecy);
      const dIris = Math.hypot(x - cx, y - cy);
      let v = background[i];
      v = v * (1 - coverage(dEye, cfg.eyeR)) + cfg.scleraLevel * coverage(dEye, cfg.eyeR);
      v = v * (1 - coverage(dIris, cfg.irisR)) + cfg.irisLevel * coverage(dIris, cfg.irisR);
      v = v * (1 - coverage(dIris, cfg.pupilR)) + cfg.pupilLevel * coverage(dIris, cfg.pupilR);
      out[i] = v;
    }
  return out;
}

export function labelFrame(cfg: ToySceneCfg, cx: number, cy: number): Uint8Array {
  const { h, w } = cfg;
  const labels = new Uint8Array(h * w);
  const ecx = (w - 1) / 2;
  const ecy = (h - 1) / 2;
  for (let y = 0; y < h; y++)
    for (let x = 0; x < w; x++) {
      const i = y * w + x;
      if (coverage(Math.hypot(x - ecx, y - ecy), cfg.eyeR) >= 0.5) labels[i] = 1;
      const dIris = Math.hypot(x - cx, y - cy);
      if (coverage(dIris, cfg.irisR) >= 0.5) labels[i] = 2;
      if (coverage(dIris, cfg.pupilR) >= 0.5) labels[i] = 3;
    }
  return labels;
}

export function majorityPatchLabels(labels: Uint8Array, h: number, w: number, patch: number): Int32Array {
  const gh = Math.ceil(h / patch);
  const gw = Math.ceil(w / patch);
  const out = new Int32Array(gh * gw);
  for (let ty = 0; ty < gh; ty++)
    for (let tx = 0; tx < gw; tx++) {
      const counts = [0, 0, 0, 0];
      for (let py = 0; py < patch; py++)
        for (let px = 0; px < patch; px++) {
          const y = ty * patch + py;
          const x = tx * patch + px;
          if (y < h && x < w) counts[labels[y * w + x]]++;
        }
      out[ty * gw + tx] = counts.indexOf(Math.max(...counts));
    }
  return out;
}

export function makeDataset(cfg: ToySceneCfg, nFrames: number, patch: number, seed: number): Sample[] {
  const rng = new Rng(seed);
  const { h, w } = cfg;
  const background = new Float64Array(h * w);
  for (let i = 0; i < background.length; i++) background[i] = cfg.bgLevel * (1 + 0.3 * (rng.next() - 0.5));
  const ecx = (w - 1) / 2;
  const ecy = (h - 1) / 2;
  const samples: Sample[] = [];
  let prevFrame: Float64Array | null = null;
  let prevLabels: Uint8Array | null = null;
  for (let t = 0; t < nFrames; t++) {
    const phase = (2 * Math.PI * t) / nFrames;
    const cx = ecx + 4.5 * Math.sin(phase * 2);
    const cy = ecy + 3.0 * Math.sin(phase * 4 + 0.6);
    const frame = renderFrame(cfg, cx, cy, background);
    const labels = labelFrame(cfg, cx, cy);
    if (prevFrame) {
      const events = new Float64Array(h * w);
      for (let i = 0; i < events.length; i++)
        events[i] = Math.abs(frame[i] - prevFrame[i]) > cfg.sigma ? 1 : 0;
      const prevSeg = new Float64Array(h * w);
      for (let i = 0; i < prevSeg.length; i++) prevSeg[i] = prevLabels![i] / 3;
      const margin = 1.5;
      const trueBox = Float64Array.from([
        Math.max(cx - cfg.irisR - margin, 0) / (w - 1),
        Math.max(cy - cfg.irisR - margin, 0) / (h - 1),
        Math.min(cx + cfg.irisR + margin, w - 1) / (w - 1),
        Math.min(cy + cfg.irisR + margin, h - 1) / (h - 1),
      ]);
      samples.push({
        frame,
        events,
        prevSeg,
        labels,
        patchLabels: majorityPatchLabels(labels, h, w, patch),
        trueBox,
      });
    }
    prevFrame = frame;
    prevLabels = labels;
  }
  return samples;
}
