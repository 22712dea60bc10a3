import init, { solve, sweep, divisors } from "./pkg/phasewave_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// diverging blue-white-red for signed data
function diverging(t) {
  const s = Math.max(-1, Math.min(1, t));
  const c = Math.round(255 * (1 - Math.abs(s)));
  return s < 0 ? [c, c, 255] : [255, c, c];
}

// dark-to-light for nonnegative data in [0, 1]
function sequential(t) {
  const s = Math.max(0, Math.min(1, t));
  return [Math.round(20 + 235 * s), Math.round(30 + 200 * s * s), Math.round(90 + 100 * (1 - s))];
}

function heatmap(canvas, values, side, color) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(side, side);
  for (let i = 0; i < side * side; i++) {
    // row 0 at the bottom
    const x = i % side, y = side - 1 - Math.floor(i / side);
    const rgb = values[i] === null ? [230, 230, 230] : color(values[i]);
    img.data.set([...rgb, 255], 4 * (y * side + x));
  }
  const tmp = new OffscreenCanvas(side, side);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function fmt(x) {
  return typeof x === "number" ? x.toExponential(4) : String(x);
}

function guarded(out, f) {
  return () => {
    out.classList.remove("err");
    try {
      f();
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  };
}

function runSolve() {
  const r = JSON.parse(solve($("law").value, num("gamma"), new Float64Array([num("a1"), num("a2")]), num("n"), num("grid")));
  const peak = Math.max(...r.profile.map(Math.abs)) || 1;
  heatmap($("profile"), r.profile.map((v) => v / peak), r.grid, diverging);
  $("solve-out").textContent = [
    `ν = ${r.nu}, ${r.modes} stored modes`,
    `ω  = [${r.omega.map((w) => w.toFixed(12)).join(", ")}]`,
    `ω⁰ = [${r.omega0.map((w) => w.toFixed(12)).join(", ")}]`,
    `‖𝒫‖ = ${fmt(r.p_residual)}`,
    `min |V| = ${fmt(r.min_divisor)}`,
    `Newton: ${r.newton_trace.map(fmt).join("  ")}`,
    `|χ| ≤ ${fmt(peak)}  (blue < 0 < red)`,
  ].join("\n");
}

function runSweep() {
  const r = JSON.parse(sweep($("law").value, num("gamma"), new Float64Array([1, 1]), num("amin"), num("amax"), num("count"), num("n")));
  const ok = r.rows.filter((row) => row.shift);
  const canvas = $("shift");
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 36;
  ctx.clearRect(0, 0, W, H);
  const xs = ok.map((row) => Math.log10(row.magnitude));
  const ys = ok.flatMap((row) => row.shift.map((s) => Math.log10(Math.abs(s) || 1e-300)));
  if (ok.length < 2) {
    $("sweep-out").textContent = "no converged rows";
    return;
  }
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (W - 2 * pad);
  const py = (y) => H - pad - ((y - y0) / (y1 - y0 || 1)) * (H - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText("log₁₀|a|", W / 2 - 20, H - 8);
  ctx.fillText("log₁₀|ω−ω⁰|", 4, 14);
  const colors = ["#c33", "#36c", "#393"];
  for (let j = 0; j < r.nu; j++) {
    ctx.strokeStyle = colors[j % colors.length];
    ctx.beginPath();
    ok.forEach((row, i) => {
      const x = px(xs[i]), y = py(Math.log10(Math.abs(row.shift[j]) || 1e-300));
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillRect(x - 2, y - 2, 4, 4);
    });
    ctx.stroke();
  }
  const slopes = [];
  for (let j = 0; j < r.nu; j++) {
    const a = Math.log10(Math.abs(ok[0].shift[j])), b = Math.log10(Math.abs(ok[ok.length - 1].shift[j]));
    slopes.push(((b - a) / (xs[xs.length - 1] - xs[0])).toFixed(3));
  }
  $("sweep-out").textContent = [
    `direction (1, 1)/√2, ${ok.length} of ${r.rows.length} rows converged`,
    `end-to-end log-log slope per phase: ${slopes.join(", ")}  (2 expected)`,
    "",
    "|a|          " + r.omega0.map((_, j) => `ω${j + 1} − ω⁰${j + 1}`.padEnd(14)).join(""),
    ...r.rows.map((row) =>
      fmt(row.magnitude).padEnd(13) + (row.shift ? row.shift.map((s) => fmt(s).padEnd(14)).join("") : row.error)),
  ].join("\n");
}

function runDivisors() {
  const r = JSON.parse(divisors($("law").value, num("gamma"), num("radius"), num("tau")));
  const side = 2 * r.radius + 1;
  const logs = r.margin.map((v) => (v === null ? null : Math.log10(Math.max(v, 1e-12))));
  const finite = logs.filter((v) => v !== null);
  const [lo, hi] = [Math.min(...finite), Math.max(...finite)];
  heatmap($("margin"), logs.map((v) => (v === null ? null : (v - lo) / (hi - lo || 1))), side, sequential);
  $("divisors-out").textContent = [
    `dist(⟨ω⁰,m⟩, 2πℤ)·|m|^τ over |m| ≤ ${r.radius}, τ = ${r.tau}`,
    `colour: log₁₀ from ${lo.toFixed(2)} (dark) to ${hi.toFixed(2)} (light)`,
    `smallest scaled margin ${fmt(r.min_scaled_margin)}`,
    `A1 ${r.a1_ok ? "holds" : "fails"}, A2 ${r.a2_ok ? "holds" : "fails"}, A4 ${r.a4_ok ? "holds" : "fails"}`,
    "Ω =",
    ...r.omega_matrix.map((row) => "  " + row.map((x) => x.toFixed(5).padStart(12)).join("")),
  ].join("\n");
}

await init();
$("solve").addEventListener("click", guarded($("solve-out"), runSolve));
$("sweep").addEventListener("click", guarded($("sweep-out"), runSweep));
$("divisors").addEventListener("click", guarded($("divisors-out"), runDivisors));
guarded($("solve-out"), runSolve)();
guarded($("divisors-out"), runDivisors)();
