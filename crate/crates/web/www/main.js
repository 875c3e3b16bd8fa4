import init, { scene, augmented_scene, degrade_and_score } from "./pkg/nircolor_web.js";

const $ = (id) => document.getElementById(id);
let draw = 0;

function paint(id, frame) {
  const canvas = $(id);
  const side = frame.side;
  canvas.width = side;
  canvas.height = side;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(frame.rgba()), side, side), 0, 0);
  frame.free();
}

function params() {
  return [Number($("seed").value) >>> 0, Number($("index").value) >>> 0, Number($("side").value)];
}

function guarded(fn) {
  return () => {
    try {
      $("error").textContent = "";
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

const showScene = guarded(() => {
  const s = scene(...params());
  paint("scene-nir", s.nir());
  paint("scene-gray", s.gray());
  paint("scene-rgb", s.rgb());
  s.free();
});

const showAugment = guarded(() => {
  const on = (id) => $(id).checked;
  const s = augmented_scene(...params(), draw, on("aug-scale"), on("aug-mirror"), on("aug-crop"), on("aug-contrast"));
  paint("aug-nir", s.nir());
  paint("aug-rgb", s.rgb());
  s.free();
  $("aug-count").textContent = `draw ${draw}`;
});

const showMetrics = guarded(() => {
  const v = (id) => Number($(id).value);
  const r = degrade_and_score(...params(), v("noise"), v("cast-r"), 0, v("cast-b"), v("gain"));
  paint("metric-img", r.degraded());
  const rows = [
    ["PSNR", `${r.psnr.toFixed(2)} dB`],
    ["SSIM", r.ssim.toFixed(4)],
    ["MS-SSIM", r.ms_ssim.toFixed(4)],
    ["angular error", `${r.ae.toFixed(2)} deg`],
    ["mix loss", r.mix.toFixed(4)],
  ];
  $("metrics").innerHTML = rows.map(([k, x]) => `<tr><td>${k}</td><td>${x}</td></tr>`).join("");
  r.free();
});

function refreshAll() {
  showScene();
  showAugment();
  showMetrics();
}

await init();
for (const id of ["seed", "index", "side"]) $(id).addEventListener("change", refreshAll);
for (const id of ["aug-scale", "aug-crop", "aug-mirror", "aug-contrast"]) $(id).addEventListener("change", showAugment);
$("aug-draw").addEventListener("click", () => {
  draw += 1;
  showAugment();
});
for (const id of ["noise", "cast-r", "cast-b", "gain"]) $(id).addEventListener("input", showMetrics);
refreshAll();
