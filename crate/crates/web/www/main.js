import init, { certify_1d, relu_partition, enclosure_explorer } from "./pkg/certnorm_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas, xs, ys) {
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + (x - x0) / (x1 - x0 || 1) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - (y - y0) / (y1 - y0) * (canvas.height - 2 * pad);
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad - 4);
  ctx.fillText(y0.toPrecision(3), 2, canvas.height - pad + 12);
  return { ctx, sx, sy };
}

function line(ctx, pts, sx, sy, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
  ctx.stroke();
}

function guard(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function runCertify() {
  guard($("c-out"), () => {
    const r = JSON.parse(certify_1d(num("c-width"), BigInt(num("c-seed")), num("c-order"),
      num("c-steps"), num("c-lo"), num("c-hi")));
    const h = r.history[r.history.length - 1];
    $("c-out").textContent =
      `norm in [${r.norm[0].toPrecision(10)}, ${r.norm[1].toPrecision(10)}]  ` +
      `gap ${h.gap.toExponential(3)}  cells ${h.cells}`;
    const ys = r.curve.map((p) => p[1]).concat(r.cells.flatMap((c) => c.f));
    const { ctx, sx, sy } = frame($("c-plot"), r.curve.map((p) => p[0]), ys.filter(Number.isFinite));
    if (num("c-order") === 0) {
      ctx.fillStyle = "rgba(40, 110, 200, 0.18)";
      for (const c of r.cells) {
        ctx.fillRect(sx(c.x[0]), sy(c.f[1]), sx(c.x[1]) - sx(c.x[0]), sy(c.f[0]) - sy(c.f[1]));
      }
    }
    ctx.strokeStyle = "#bbb";
    for (const c of r.cells) {
      ctx.beginPath();
      ctx.moveTo(sx(c.x[0]), $("c-plot").height - 30);
      ctx.lineTo(sx(c.x[0]), $("c-plot").height - 24);
      ctx.stroke();
    }
    line(ctx, r.curve, sx, sy, "#c33");
    const gaps = r.history.map((e) => [e.step, Math.log10(Math.max(e.normalized_gap, 1e-300))]);
    const g = frame($("c-gap"), gaps.map((p) => p[0]), gaps.map((p) => p[1]));
    line(g.ctx, gaps, g.sx, g.sy, "#285");
    g.ctx.fillText("log10 normalized gap per step", 40, 14);
  });
}

function runRelu() {
  guard($("r-out"), () => {
    const r = JSON.parse(relu_partition(num("r-width"), num("r-depth"), BigInt(num("r-seed")), num("r-steps")));
    const exact = r.cells.filter((c) => c.exact).length;
    $("r-out").textContent =
      `norm in [${r.norm[0].toPrecision(8)}, ${r.norm[1].toPrecision(8)}]  ` +
      `${r.cells.length} cells, ${exact} affine (exact)`;
    const cv = $("r-plot");
    const ctx = cv.getContext("2d");
    const s = (v) => (v + 1) / 2 * cv.width;
    const logs = r.cells.filter((c) => c.eta > 0).map((c) => Math.log10(c.eta));
    const [lo, hi] = [Math.min(...logs), Math.max(...logs)];
    ctx.clearRect(0, 0, cv.width, cv.height);
    for (const c of r.cells) {
      const t = c.eta > 0 ? (Math.log10(c.eta) - lo) / (hi - lo || 1) : 0;
      ctx.fillStyle = c.exact ? "#eee" : `hsl(${240 - 240 * t}, 80%, 55%)`;
      const [x, y] = [s(c.x[0]), cv.height - s(c.y[1])];
      const [w, h] = [s(c.x[1]) - s(c.x[0]), s(c.y[1]) - s(c.y[0])];
      ctx.fillRect(x, y, w, h);
      ctx.strokeStyle = "rgba(0,0,0,0.25)";
      ctx.strokeRect(x, y, w, h);
    }
  });
}

function runExplore() {
  guard($("e-out"), () => {
    let [lo, hi] = [num("e-lo"), num("e-hi")];
    if (lo > hi) [lo, hi] = [hi, lo];
    const r = JSON.parse(enclosure_explorer(num("e-width"), BigInt(num("e-seed")), lo, hi));
    const fmt = (p) => `[${p[0].toPrecision(5)}, ${p[1].toPrecision(5)}]`;
    $("e-out").textContent = ["value", "jac", "hess"]
      .map((k) => `${k.padEnd(6)} enclosure ${fmt(r.enclosure[k]).padEnd(26)} sampled ${fmt(r.sampled[k])}`)
      .join("\n");
    const { ctx, sx, sy } = frame($("e-plot"), r.curve.map((p) => p[0]),
      r.curve.map((p) => p[1]).concat(r.enclosure.value));
    ctx.fillStyle = "rgba(40, 110, 200, 0.2)";
    const [v0, v1] = r.enclosure.value;
    ctx.fillRect(sx(lo), sy(v1), Math.max(sx(hi) - sx(lo), 1), sy(v0) - sy(v1));
    line(ctx, r.curve, sx, sy, "#c33");
  });
}

await init();
$("c-run").onclick = runCertify;
$("r-run").onclick = runRelu;
for (const id of ["e-width", "e-seed", "e-lo", "e-hi"]) $(id).oninput = runExplore;
runCertify();
runRelu();
runExplore();
