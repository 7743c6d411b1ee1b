import init, { problems, level_schedule, cost_curves, estimate } from "./pkg/nestor_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, text, isError) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "err" : "";
}

function bars(canvas, values, labels) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const max = Math.max(...values, 1);
  const w = (width - 40) / values.length;
  ctx.font = "11px sans-serif";
  values.forEach((v, i) => {
    const h = ((height - 40) * v) / max;
    ctx.fillStyle = labels[i].clamped ? "#d98c1f" : "#3b6fb6";
    ctx.fillRect(30 + i * w + 2, height - 20 - h, w - 4, h);
    ctx.fillStyle = "#222";
    ctx.fillText(String(i), 30 + i * w + w / 2 - 3, height - 6);
    ctx.fillText(String(v), 30 + i * w + 4, height - 24 - h);
  });
}

function loglog(canvas, eps, curves) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 50;
  ctx.clearRect(0, 0, width, height);
  const xs = eps.map((e) => Math.log2(1 / e));
  const all = curves.flatMap((c) => c.values.filter((v) => v > 0).map(Math.log10));
  const [x0, x1] = [Math.min(...xs) - 0.2, Math.max(...xs) + 0.2];
  const [y0, y1] = [Math.floor(Math.min(...all)), Math.ceil(Math.max(...all))];
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (width - 2 * pad);
  const py = (y) => height - pad + 10 - ((y - y0) / (y1 - y0 || 1)) * (height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad - 10, width - 2 * pad, height - 2 * pad);
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  for (let y = y0; y <= y1; y++) ctx.fillText("1e" + y, 8, py(y) + 4);
  eps.forEach((e, i) => ctx.fillText(String(e), px(xs[i]) - 12, height - pad + 26));
  const colors = ["#3b6fb6", "#b63b3b", "#e07b39", "#3b9b5a", "#7a4fb0"];
  curves.forEach((c, k) => {
    ctx.strokeStyle = ctx.fillStyle = colors[k % colors.length];
    ctx.setLineDash(c.kind === "charged" ? [] : [5, 4]);
    ctx.beginPath();
    c.values.forEach((v, i) => {
      if (v <= 0) return;
      const [x, y] = [px(xs[i]), py(Math.log10(v))];
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillText(`${c.estimator} ${c.kind}`, width - pad - 150, pad + 4 + 14 * k);
  });
  ctx.setLineDash([]);
}

function fillProblems(select, ids, chosen) {
  for (const id of ids) {
    const o = document.createElement("option");
    o.textContent = id;
    o.selected = id === chosen;
    select.appendChild(o);
  }
}

await init();
const ids = JSON.parse(problems());
fillProblems($("c-problem"), ids, "gauss-rne-D1");
fillProblems($("e-problem"), ids, "gauss-rne-D1");

$("s-go").onclick = () => {
  try {
    const s = JSON.parse(level_schedule(num("s-d"), num("s-delta"), num("s-l"), num("s-eps")));
    show("s-out", `r = ${s.rate.toFixed(4)}, rho = ${s.rho.toFixed(4)}, p = ${s.p}, B = ${s.truncation}, M = ${s.replications}` +
      (s.clamped.length ? `\nlevels run once because floor(M P(n)) = 0: ${s.clamped.join(", ")}` : ""));
    bars($("s-canvas"), s.counts, s.counts.map((_, n) => ({ clamped: s.clamped.includes(n) })));
  } catch (e) {
    show("s-out", String(e), true);
  }
};

$("c-go").onclick = () => {
  try {
    const v = JSON.parse(cost_curves($("c-problem").value, num("c-eps"), num("c-points"), 0.25));
    loglog($("c-canvas"), v.eps, v.curves);
    show("c-out", v.curves
      .map((c) => `${c.estimator} ${c.kind}: log-log slope ${c.slope == null ? "n/a" : (-c.slope).toFixed(3)}`)
      .join("\n"));
  } catch (e) {
    show("c-out", String(e), true);
  }
};

$("e-go").onclick = () => {
  show("e-out", "running...");
  setTimeout(() => {
    try {
      const r = JSON.parse(estimate($("e-problem").value, $("e-est").value, num("e-eps"), BigInt(num("e-seed"))));
      show("e-out", `estimate ${r.estimate.toFixed(6)}` +
        (r.truth == null ? "" : `  (truth ${r.truth.toFixed(6)}, error ${(r.estimate - r.truth).toExponential(2)})`) +
        `\nprocess steps ${r.classical_steps}, charged queries ${r.quantum_charged}`);
    } catch (e) {
      show("e-out", String(e), true);
    }
  }, 10);
};

$("s-go").onclick();
$("c-go").onclick();
