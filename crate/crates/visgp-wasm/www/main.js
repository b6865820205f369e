// Static front-end for the visgp-wasm demo. Build the module first:
//   wasm-pack build --target web crates/visgp-wasm
// then serve the crate directory (e.g. `python3 -m http.server`) and open
// crates/visgp-wasm/www/index.html.

import init, { visibility_demo, covariance_demo, prediction_demo } from "../pkg/visgp_wasm.js";

const canvas = document.getElementById("canvas");
const ctx = canvas.getContext("2d");
const statusBox = document.getElementById("status");
const legend = document.getElementById("legend");

const el = (id) => document.getElementById(id);
const controls = {
  mode: el("mode"), domain: el("domain"), n: el("n"), seed: el("seed"),
  dmax: el("dmax"), phi: el("phi"), noise: el("noise"), k: el("k"),
  strategy: el("strategy"), panel: el("panel"),
};

let picked = null;        // covariance-mode reference site (domain coords)
let lastTransform = null; // world -> canvas mapping of the last render

function makeTransform(bbox) {
  const pad = 24;
  const w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const sx = w / (bbox.hi[0] - bbox.lo[0]);
  const sy = h / (bbox.hi[1] - bbox.lo[1]);
  const s = Math.min(sx, sy);
  return {
    s,
    toX: (x) => pad + (x - bbox.lo[0]) * s,
    toY: (y) => canvas.height - pad - (y - bbox.lo[1]) * s,
    fromCanvas: (cx, cy) => [
      bbox.lo[0] + (cx - pad) / s,
      bbox.lo[1] + (canvas.height - pad - cy) / s,
    ],
  };
}

function drawDomain(dom, t) {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.beginPath();
  for (const ring of [dom.outer, ...dom.holes]) {
    ring.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(t.toX(x), t.toY(y));
      else ctx.lineTo(t.toX(x), t.toY(y));
    });
    ctx.closePath();
  }
  ctx.fillStyle = "#ffffff";
  ctx.fill("evenodd");
  ctx.strokeStyle = "#334";
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

// Blue-white-red diverging map for fields.
function colorFor(v, lo, hi) {
  const u = Math.max(0, Math.min(1, (v - lo) / (hi - lo + 1e-12)));
  const r = Math.round(255 * Math.min(1, 2 * u));
  const b = Math.round(255 * Math.min(1, 2 * (1 - u)));
  const g = Math.round(255 * (1 - Math.abs(2 * u - 1)) * 0.85);
  return `rgb(${r},${g},${b})`;
}

function drawField(grid, cells, t, lo, hi) {
  const w = grid.dx * t.s + 1, h = grid.dy * t.s + 1;
  for (let iy = 0; iy < grid.ny; iy++) {
    for (let ix = 0; ix < grid.nx; ix++) {
      const v = cells[iy * grid.nx + ix];
      if (v === null) continue;
      const x = grid.x0 + ix * grid.dx, y = grid.y0 + (iy + 1) * grid.dy;
      ctx.fillStyle = colorFor(v, lo, hi);
      ctx.fillRect(t.toX(x), t.toY(y), w, h);
    }
  }
}

function fieldRange(cellsList) {
  let lo = Infinity, hi = -Infinity;
  for (const cells of cellsList) {
    for (const v of cells) {
      if (v === null) continue;
      lo = Math.min(lo, v); hi = Math.max(hi, v);
    }
  }
  return [lo, hi];
}

function drawPoints(points, t, style = "#d33", r = 2.5) {
  ctx.fillStyle = style;
  for (const [x, y] of points) {
    ctx.beginPath();
    ctx.arc(t.toX(x), t.toY(y), r, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function runVisibility() {
  const out = JSON.parse(visibility_demo(
    controls.domain.value, +controls.n.value, +controls.seed.value, +controls.dmax.value));
  const t = makeTransform(out.domain.bbox);
  lastTransform = t;
  drawDomain(out.domain, t);
  ctx.strokeStyle = "rgba(40,90,200,0.25)";
  ctx.lineWidth = 0.7;
  for (const [i, j] of out.edges) {
    ctx.beginPath();
    ctx.moveTo(t.toX(out.points[i][0]), t.toY(out.points[i][1]));
    ctx.lineTo(t.toX(out.points[j][0]), t.toY(out.points[j][1]));
    ctx.stroke();
  }
  ctx.strokeStyle = "rgba(220,60,60,0.9)";
  ctx.lineWidth = 1.4;
  for (const [i, j] of out.added_edges) {
    ctx.beginPath();
    ctx.moveTo(t.toX(out.points[i][0]), t.toY(out.points[i][1]));
    ctx.lineTo(t.toX(out.points[j][0]), t.toY(out.points[j][1]));
    ctx.stroke();
  }
  drawPoints(out.points, t, "#223", 2.4);
  statusBox.textContent =
    `${out.edge_count} visibility edges, ${out.added_edges.length} completion edges (red), ` +
    `${out.cliques} cliques, largest ${out.largest_clique}`;
  legend.textContent = "blue: visibility edges — red: edges added by chordal completion";
}

function runCovariance() {
  const dflt = { fork: [-5, 3], ushape: [-5, -4], "figure-eight": [-0.5, -0.5] };
  const site = picked ?? dflt[controls.domain.value];
  const out = JSON.parse(covariance_demo(
    controls.domain.value, +controls.n.value, +controls.seed.value,
    site[0], site[1], +controls.phi.value, 64));
  const t = makeTransform(out.domain.bbox);
  lastTransform = t;
  drawDomain(out.domain, t);
  const panel = controls.panel.value;
  const cells = panel === "euclid" ? out.euclid
    : panel === "diff" ? out.visgp.map((v, i) => v === null || out.euclid[i] === null ? null : v - out.euclid[i])
    : out.visgp;
  const [lo, hi] = panel === "diff" ? fieldRange([cells]) : [0, 1];
  drawField(out.grid, cells, t, lo, hi);
  ctx.strokeStyle = "#334"; ctx.lineWidth = 1.5;
  drawPoints([[out.site[0], out.site[1]]], t, "#000", 5);
  statusBox.textContent =
    `covariance field from (${out.site[0].toFixed(2)}, ${out.site[1].toFixed(2)}); ` +
    `click inside the domain to move the site. Panel: ${panel}`;
  legend.textContent = panel === "diff"
    ? `difference range [${lo.toFixed(2)}, ${hi.toFixed(2)}] (selected minus Euclidean)`
    : "covariance scale 0 (blue) to 1 (red); barriers suppress the selected field";
}

function runPrediction() {
  const out = JSON.parse(prediction_demo(
    controls.domain.value, +controls.n.value, +controls.seed.value,
    +controls.noise.value, +controls.k.value, controls.strategy.value, 72));
  const t = makeTransform(out.domain.bbox);
  lastTransform = t;
  drawDomain(out.domain, t);
  const panel = controls.panel.value;
  const cells = panel === "euclid" ? out.euclid_mean
    : panel === "diff" ? out.visgp_mean.map((v, i) =>
        v === null || out.euclid_mean[i] === null ? null : v - out.euclid_mean[i])
    : out.visgp_mean;
  const [lo, hi] = fieldRange([out.visgp_mean, out.euclid_mean]);
  drawField(out.grid, cells, t, panel === "diff" ? -1 : lo, panel === "diff" ? 1 : hi);
  drawPoints(out.train.map(r => [r[0], r[1]]), t, "rgba(0,0,0,0.55)", 1.8);
  const p = out.params;
  statusBox.textContent =
    `fitted sigma2 ${p.sigma2.toFixed(3)}, phi ${p.phi.toFixed(3)}, tau2 ${p.tau2.toExponential(2)}; ` +
    `loglik ${p.loglik.toFixed(1)}. Panel: ${panel}`;
  legend.textContent = "kriging mean surface; dots are training sites";
}

function run() {
  statusBox.textContent = "computing…";
  setTimeout(() => {
    try {
      if (controls.mode.value === "visibility") runVisibility();
      else if (controls.mode.value === "covariance") runCovariance();
      else runPrediction();
    } catch (e) {
      statusBox.textContent = `error: ${e}`;
    }
  }, 20);
}

canvas.addEventListener("click", (ev) => {
  if (controls.mode.value !== "covariance" || !lastTransform) return;
  const rect = canvas.getBoundingClientRect();
  picked = lastTransform.fromCanvas(ev.clientX - rect.left, ev.clientY - rect.top);
  run();
});

controls.domain.addEventListener("change", () => { picked = null; });
document.getElementById("run").addEventListener("click", run);

init().then(() => {
  statusBox.textContent = "ready";
  run();
});
