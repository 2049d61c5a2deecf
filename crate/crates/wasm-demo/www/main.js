import init, { sample_target, ToyModel } from "./pkg/rgp_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };
let model = null;

// Maps [-span, span]^2 onto a square canvas.
function view(canvas, span) {
  const s = canvas.width / (2 * span);
  return { x: (v) => (v + span) * s, y: (v) => canvas.height - (v + span) * s };
}

function dots(canvas, pts, span, color, clear = true) {
  const ctx = canvas.getContext("2d");
  if (clear) ctx.clearRect(0, 0, canvas.width, canvas.height);
  const v = view(canvas, span);
  ctx.fillStyle = color;
  for (let i = 0; i < pts.length; i += 2) {
    ctx.fillRect(v.x(pts[i]) - 1.5, v.y(pts[i + 1]) - 1.5, 3, 3);
  }
}

function circle(canvas, r, span) {
  if (!(r > 0)) return;
  const ctx = canvas.getContext("2d");
  const v = view(canvas, span);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.arc(v.x(0), v.y(0), v.x(r) - v.x(0), 0, 2 * Math.PI);
  ctx.stroke();
}

function drawTarget() {
  const kind = $("kind").value;
  const pts = sample_target(kind, 1500, Number($("seed").value));
  let span = 0;
  for (const p of pts) span = Math.max(span, Math.abs(p));
  dots($("target"), pts, span * 1.1, "#e07b00");
}

function drawField() {
  if (!model) return;
  const canvas = $("field");
  const ctx = canvas.getContext("2d");
  const span = 4, n = 80;
  const soft = $("soft").checked;
  const scores = model.score_field(soft, -span, span, -span, span, n, n);
  const t = model.threshold(soft);
  const cell = canvas.width / n;
  for (let iy = 0; iy < n; iy++) {
    for (let ix = 0; ix < n; ix++) {
      const s = scores[iy * n + ix];
      const a = Math.min(1, s / (2 * t));
      ctx.fillStyle = s > t ? `rgba(220,60,60,${0.25 + 0.5 * a})` : `rgba(60,120,220,${0.15 + 0.4 * (1 - a)})`;
      ctx.fillRect(ix * cell, canvas.height - (iy + 1) * cell, cell + 0.5, cell + 0.5);
    }
  }
  dots(canvas, model.train_points(), span, "#222", false);
}

function drawLatent() {
  const pts = model.projected_points();
  const r = model.radius();
  const span = r * 1.6;
  dots($("latent"), pts, span, "#2a7");
  circle($("latent"), r, span);
  circle($("latent"), model.inner_radius(), span);
}

function train() {
  status("training...");
  // Let the status text paint before the blocking call.
  setTimeout(() => {
    try {
      const t0 = performance.now();
      if (model) model.free();
      model = new ToyModel($("kind").value, Number($("epochs").value), Number($("lambda").value), Number($("seed").value));
      drawField();
      drawLatent();
      status(`done in ${((performance.now() - t0) / 1000).toFixed(1)}s, mmd2=${model.final_mmd().toExponential(2)}, mse=${model.final_mse().toFixed(3)}`);
    } catch (e) {
      status(`error: ${e.message ?? e}`);
    }
  }, 10);
}

await init();
$("sample").onclick = drawTarget;
$("kind").onchange = drawTarget;
$("train").onclick = train;
$("soft").onchange = drawField;
drawTarget();
