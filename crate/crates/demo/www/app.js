import init, { dimensionSweep, fusionCurve, spectrumComparison } from "./pkg/mbfa_demo.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

function num(id) {
  return Number(document.getElementById(id).value);
}

function plot(canvasId, xs, series, yMax = 1) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const pad = 40;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const px = (x) => pad + (xMax === xMin ? w / 2 : ((x - xMin) / (xMax - xMin)) * w);
  const py = (y) => pad + h - (y / yMax) * h;

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, pad + h);
  ctx.lineTo(pad + w, pad + h);
  ctx.stroke();
  for (const t of [0, 0.5, 1]) {
    ctx.fillText((t * yMax).toPrecision(2), 4, py(t * yMax) + 4);
  }
  ctx.fillText(String(xMin), px(xMin) - 4, pad + h + 16);
  ctx.fillText(String(xMax), px(xMax) - 8, pad + h + 16);

  for (const { values, color } of series) {
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    values.forEach((y, i) => (i === 0 ? ctx.moveTo(px(xs[i]), py(y)) : ctx.lineTo(px(xs[i]), py(y))));
    ctx.stroke();
    values.forEach((y, i) => ctx.fillRect(px(xs[i]) - 2, py(y) - 2, 4, 4));
  }
}

function guarded(fn) {
  return () => {
    const status = document.getElementById("status");
    status.textContent = "";
    status.className = "";
    try {
      fn();
    } catch (e) {
      status.textContent = String(e);
      status.className = "error";
    }
  };
}

const runSweep = guarded(() => {
  const r = JSON.parse(dimensionSweep(num("sweep-seed"), num("sweep-noise"), num("sweep-d")));
  plot("sweep-plot", r.d, [
    { values: r.first, color: COLORS[0] },
    { values: r.second, color: COLORS[1] },
    { values: r.fused, color: COLORS[2] },
  ]);
});

const runFusion = guarded(() => {
  const r = JSON.parse(fusionCurve(num("fusion-seed"), num("fusion-noise"), num("fusion-d"), 21));
  plot("fusion-plot", r.alpha, [{ values: r.accuracy, color: COLORS[2] }]);
});

const runSpectrum = guarded(() => {
  const r = JSON.parse(spectrumComparison(num("spec-seed"), num("spec-scale"), num("spec-d")));
  const top = Math.max(...r.mbfa.map(Math.abs), 1e-300);
  const idx = r.mbfa.map((_, i) => i + 1);
  plot("spec-plot", idx, [
    { values: r.mbfa.map((v) => v / top), color: COLORS[3] },
    { values: r.mcca, color: COLORS[4] },
  ], Math.max(1, ...r.mcca));
  document.getElementById("spec-note").textContent =
    `largest MBFA eigenvalue ${r.mbfa[0].toExponential(3)}, largest MCCA eigenvalue ${r.mcca[0].toFixed(6)}`;
});

await init();
document.getElementById("sweep-run").addEventListener("click", runSweep);
document.getElementById("fusion-run").addEventListener("click", runFusion);
document.getElementById("spec-run").addEventListener("click", runSpectrum);
runSweep();
runFusion();
runSpectrum();
