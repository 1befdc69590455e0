import init, { Demo } from "./pkg/sarfocus_web.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function draw(id, pixmap) {
  const canvas = $(id);
  const ctx = canvas.getContext("2d");
  if (!pixmap) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  canvas.width = pixmap.width;
  canvas.height = pixmap.height;
  const data = new Uint8ClampedArray(pixmap.rgba());
  ctx.putImageData(new ImageData(data, pixmap.width, pixmap.height), 0, 0);
  pixmap.free();
}

function plot(values) {
  const canvas = $("ape");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (values.length === 0) return;
  const lo = Math.min(...values), hi = Math.max(...values);
  const span = hi > lo ? hi - lo : 1;
  const sx = canvas.width / (values.length - 1);
  const sy = (canvas.height - 20) / span;
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, 10 + hi * sy);
  ctx.lineTo(canvas.width, 10 + hi * sy);
  ctx.stroke();
  ctx.strokeStyle = "#c22";
  ctx.beginPath();
  values.forEach((v, i) => {
    const y = 10 + (hi - v) * sy;
    i === 0 ? ctx.moveTo(0, y) : ctx.lineTo(i * sx, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText(`${hi.toFixed(1)}`, 2, 10);
  ctx.fillText(`${lo.toFixed(1)}`, 2, canvas.height - 2);
}

function table(m) {
  const names = ["defocused", "azimuth-only"];
  const rows = [];
  for (let i = 0; i + 1 < m.length; i += 2) {
    const name = i / 2 < 2 ? names[i / 2] : i / 2 === 2 ? "preprocessed" : `2-D iteration ${i / 2 - 2}`;
    rows.push(`<tr><td>${name}</td><td>${m[i].toFixed(3)}</td><td>${m[i + 1].toFixed(3)}</td></tr>`);
  }
  $("metrics").innerHTML = "<tr><th>image</th><th>contrast</th><th>entropy</th></tr>" + rows.join("");
}

function showSpectrum() {
  if (demo) draw("spectrum", demo.spectrum(Number($("stage").value)));
}

function busy(msg, work) {
  $("status").textContent = msg;
  $("simulate").disabled = $("autofocus").disabled = true;
  setTimeout(() => {
    const t0 = performance.now();
    try {
      work();
      $("status").textContent = `done in ${((performance.now() - t0) / 1000).toFixed(2)} s`;
    } catch (e) {
      $("status").textContent = `error: ${e.message ?? e}`;
    }
    $("simulate").disabled = false;
    $("autofocus").disabled = demo === null;
  }, 10);
}

$("simulate").onclick = () =>
  busy("simulating and backprojecting…", () => {
    if (demo) demo.free();
    demo = null;
    demo = new Demo(Number($("amp").value), Number($("cycles").value), $("axis").value === "range");
    draw("defocused", demo.defocused());
    showSpectrum();
    for (const id of ["oned", "refocused", "field"]) draw(id, null);
    plot([]);
    table(demo.metrics());
  });

$("autofocus").onclick = () =>
  busy("autofocusing…", () => {
    demo.autofocus();
    draw("oned", demo.azimuth_only());
    draw("refocused", demo.refocused());
    draw("field", demo.field());
    plot(Array.from(demo.ape()));
    table(demo.metrics());
  });

$("stage").onchange = showSpectrum;

await init();
$("status").textContent = "ready";
$("simulate").click();
