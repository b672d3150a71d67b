import init, { sampleSizes, boundTable, supportCounts, presetNames } from "./pkg/scenopt_web.js";

const $ = (id) => document.getElementById(id);
const num = (form, name) => Number(form.elements[name].value);

function run(out, f) {
  out.classList.remove("error");
  try {
    f();
  } catch (e) {
    out.classList.add("error");
    out.textContent = e.message ?? String(e);
  }
}

function plotSizes(eps, beta) {
  const canvas = $("size-plot");
  const ctx = canvas.getContext("2d");
  const zs = Array.from({ length: 30 }, (_, i) => i + 1);
  const rows = zs.map((z) => JSON.parse(sampleSizes(eps, beta, z, 1, 1)));
  const top = Math.max(...rows.map((r) => r.explicit));
  const [w, h, pad] = [canvas.width, canvas.height, 30];
  const x = (z) => pad + ((z - 1) / 29) * (w - 2 * pad);
  const y = (n) => h - pad - (n / top) * (h - 2 * pad);
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#222";
  ctx.font = "12px sans-serif";
  ctx.fillText(`N (max ${top})`, 4, 14);
  ctx.fillText("zeta 1..30", w - 70, h - 8);
  for (const [key, color] of [["exact", "#4a7ab5"], ["explicit", "#c44"]]) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    rows.forEach((r, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(zs[i]), y(r[key])));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(key, x(zs[20]), y(rows[20][key]) - 6);
  }
}

function sizes(e) {
  e?.preventDefault();
  const f = $("size-form");
  const out = $("size-out");
  run(out, () => {
    const [eps, beta] = [num(f, "eps"), num(f, "beta")];
    const v = JSON.parse(sampleSizes(eps, beta, num(f, "zeta"), num(f, "r"), num(f, "d")));
    out.textContent = `exact ${v.exact}   explicit ${v.explicit}   VC ${v.vc} (dimension ${v.vc_dimension.toFixed(1)})`;
    plotSizes(eps, beta);
  });
}

function bounds(e) {
  e?.preventDefault();
  const f = $("bound-form");
  const out = $("bound-out");
  run(out, () => {
    const rows = JSON.parse(boundTable(num(f, "k"), num(f, "nu"), num(f, "nd"), num(f, "nf"), num(f, "rf")));
    const body = rows.map((r) => `<tr><td>${r.k}</td><td>${r.std}</td><td>${r.srank}</td><td>${r.new}</td></tr>`);
    out.innerHTML = `<table><tr><th>k</th><th>standard</th><th>rank</th><th>structured</th></tr>${body.join("")}</table>`;
  });
}

function support(e) {
  e?.preventDefault();
  const f = $("support-form");
  const out = $("support-out");
  const hist = $("support-hist");
  run(out, () => {
    const v = JSON.parse(
      supportCounts(f.elements.preset.value, num(f, "n"), num(f, "trials"), num(f, "seed")),
    );
    out.textContent = `n = ${v.n}, bound ${v.bound}, largest count ${v.max}, ${v.violations} above the bound`;
    const peak = Math.max(...v.histogram, 1);
    hist.innerHTML = v.histogram
      .map((c, i) => {
        const cls = ["bar", i > v.bound ? "over" : "", i === v.bound ? "bound" : ""].join(" ");
        return `<div class="${cls}" style="height:${(100 * c) / peak}%" title="${c} trials"><span>${i}</span></div>`;
      })
      .join("");
  });
}

await init();
const select = $("support-form").elements.preset;
for (const name of JSON.parse(presetNames())) select.add(new Option(name, name));
$("size-form").addEventListener("submit", sizes);
$("bound-form").addEventListener("submit", bounds);
$("support-form").addEventListener("submit", support);
sizes();
bounds();
