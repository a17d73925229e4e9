/** Train the toy joint model and export the weight bundle + loss curve. */

import { exportArtifacts, jointTrain, TOY_TRAIN } from "./train.js";

function arg(name: string, fallback: string): string {
  const i = process.argv.indexOf(`--${name}`);
  return i >= 0 && i + 1 < process.argv.length ? process.argv[i + 1] : fallback;
}

const steps = parseInt(arg("steps", "100"), 10);
const seed = parseInt(arg("seed", "7"), 10);
const out = arg("out", "out/weights.blwb");
const lossCsv = arg("loss-csv", "out/loss.csv");
const lambda = parseFloat(arg("lambda", "1.0"));

const cfg = { ...TOY_TRAIN, steps, seed, lambda };
const result = jointTrain(cfg, (step, r) => {
  if (step % 10 === 0 || step === steps - 1) {
    console.log(
      `step ${step}: ce=${r.ce.toFixed(4)} mse=${r.mse.toFixed(4)} total=${r.total.toFixed(4)}`,
    );
  }
});
exportArtifacts(result, out, lossCsv);
const first = result.losses[0].total;
const last = result.losses[result.losses.length - 1].total;
console.log(`loss ${first.toFixed(4)} -> ${last.toFixed(4)} (${((1 - last / first) * 100).toFixed(1)}% drop)`);
console.log(`wrote ${out} and ${lossCsv}`);
