import init, { simulate_latency, gesture_trace, encode_frame, decode_frame } from './pkg/motionlink_web.js';

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function clear(canvas) {
  const ctx = canvas.getContext('2d');
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = '11px system-ui';
  return ctx;
}

function drawHistogram(canvas, h) {
  const ctx = clear(canvas);
  const pad = 24;
  const w = (canvas.width - 2 * pad) / h.counts.length;
  const peak = Math.max(...h.counts, 1);
  ctx.fillStyle = '#4a7bd0';
  h.counts.forEach((c, i) => {
    const bh = (canvas.height - 2 * pad) * c / peak;
    ctx.fillRect(pad + i * w, canvas.height - pad - bh, Math.max(w - 1, 1), bh);
  });
  ctx.fillStyle = '#333';
  ctx.fillText(`${h.start_ms.toFixed(1)} ms`, pad, canvas.height - 6);
  const end = h.start_ms + h.width_ms * h.counts.length;
  ctx.fillText(`${end.toFixed(1)} ms`, canvas.width - pad - 50, canvas.height - 6);
  ctx.fillText(`peak ${peak}`, pad, 14);
}

function drawTrace(canvas, g) {
  const ctx = clear(canvas);
  const pad = 24;
  const t0 = g.t_ms[0] ?? 0;
  const t1 = g.t_ms[g.t_ms.length - 1] ?? 1;
  const lo = Math.min(-0.5, ...g.ay);
  const hi = Math.max(1.2, ...g.ay);
  const x = (t) => pad + (canvas.width - 2 * pad) * (t - t0) / Math.max(t1 - t0, 1);
  const y = (v) => canvas.height - pad - (canvas.height - 2 * pad) * (v - lo) / (hi - lo);

  ctx.strokeStyle = '#c33';
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(pad, y(g.tau));
  ctx.lineTo(canvas.width - pad, y(g.tau));
  ctx.stroke();
  ctx.setLineDash([]);

  ctx.strokeStyle = '#333';
  ctx.beginPath();
  g.t_ms.forEach((t, i) => (i ? ctx.lineTo(x(t), y(g.ay[i])) : ctx.moveTo(x(t), y(g.ay[i]))));
  ctx.stroke();

  ctx.fillStyle = '#070';
  for (const e of g.events) {
    ctx.beginPath();
    ctx.arc(x(e.frame_timestamp_ms), y(e.peak_value), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.fillStyle = '#c33';
  ctx.fillText(`tau ${g.tau}`, canvas.width - pad - 50, y(g.tau) - 4);
}

function runLatency() {
  const r = JSON.parse(simulate_latency(
    num('lat-frames'), num('lat-delay'), num('lat-jitter'), num('lat-min'), num('lat-max'),
    num('lat-seed'), num('lat-offset')));
  if (r.error) {
    $('lat-report').textContent = r.error;
    return;
  }
  drawHistogram($('lat-hist'), r.histogram);
  $('lat-report').textContent = r.report;
}

function runGesture() {
  const g = JSON.parse(gesture_trace(num('g-count'), num('g-noise'), num('g-seed'), num('g-tau'), num('g-refr')));
  if (g.error) {
    $('g-summary').textContent = g.error;
    return;
  }
  drawTrace($('g-plot'), g);
  $('g-summary').textContent = `${g.events.length} gesture events over ${g.t_ms.length} frames`;
}

function runEncode() {
  const r = JSON.parse(encode_frame(num('f-ts'), num('f-ax'), num('f-ay'), num('f-az'), 0, 0, 0,
    num('f-seq'), $('f-secret').value, $('f-integrity').checked));
  if (r.error) {
    $('f-out').textContent = r.error;
    return;
  }
  $('f-hex').value = r.hex;
  $('f-out').textContent = `${r.len} bytes encoded`;
}

function runDecode() {
  const r = JSON.parse(decode_frame($('f-hex').value, $('f-secret').value, $('f-integrity').checked, num('f-bit')));
  const out = $('f-out');
  out.className = r.ok ? 'good' : 'bad';
  out.textContent = JSON.stringify(r, null, 2);
}

await init();
$('lat-run').onclick = runLatency;
$('g-run').onclick = runGesture;
$('f-encode').onclick = runEncode;
$('f-decode').onclick = runDecode;
runLatency();
runGesture();
runEncode();
