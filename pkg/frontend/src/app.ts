/** Minimal browser app: submit a run, watch it finish, then render the
 * prediction lines and the per-line importance doughnuts as inline SVG.
 * No rendering dependencies — the charts are plain SVG elements. */

import { WorkbenchClient } from './client.js';
import {
  buildDoughnuts,
  buildPredictionChart,
  type DoughnutViewModel,
  type LineSeries,
} from './views.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const PALETTE = [
  '#4e79a7', '#f28e2b', '#e15759', '#76b7b2', '#59a14f',
  '#edc948', '#b07aa1', '#ff9da7', '#9c755f', '#bab0ac',
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

/** Doughnut as a sequence of SVG arc paths. */
export function renderDoughnut(model: DoughnutViewModel, size = 160): SVGElement {
  const svg = svgEl('svg', {
    viewBox: `0 0 ${size} ${size}`,
    width: String(size),
    height: String(size),
    role: 'img',
    'aria-label': model.name,
  });
  const cx = size / 2;
  const cy = size / 2;
  const r = size * 0.42;
  const hole = size * 0.24;
  let angle = -Math.PI / 2;
  model.segments.forEach((seg, i) => {
    const sweep = seg.fraction * 2 * Math.PI;
    const a0 = angle;
    const a1 = angle + sweep;
    angle = a1;
    if (sweep <= 0) return;
    const large = sweep > Math.PI ? 1 : 0;
    const p = (a: number, radius: number) =>
      `${cx + radius * Math.cos(a)} ${cy + radius * Math.sin(a)}`;
    const d = [
      `M ${p(a0, r)}`,
      `A ${r} ${r} 0 ${large} 1 ${p(a1, r)}`,
      `L ${p(a1, hole)}`,
      `A ${hole} ${hole} 0 ${large} 0 ${p(a0, hole)}`,
      'Z',
    ].join(' ');
    const path = svgEl('path', { d, fill: PALETTE[i % PALETTE.length] });
    path.appendChild(svgEl('title', {}));
    path.querySelector('title')!.textContent =
      `${seg.label}: ${(seg.fraction * 100).toFixed(1)}%`;
    svg.appendChild(path);
  });
  const label = svgEl('text', {
    x: String(cx),
    y: String(cy),
    'text-anchor': 'middle',
    'dominant-baseline': 'middle',
    'font-size': '11',
  });
  label.textContent = model.name;
  svg.appendChild(label);
  return svg;
}

/** Line chart: one polyline per series over a shared scale. */
export function renderLines(
  series: LineSeries[],
  width = 720,
  height = 240,
): SVGElement {
  const svg = svgEl('svg', {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
  });
  const pts = series.flatMap((s) => s.values).filter((v) => Number.isFinite(v));
  const ts = series.flatMap((s) => s.t);
  if (pts.length === 0 || ts.length === 0) return svg;
  const [tMin, tMax] = [Math.min(...ts), Math.max(...ts)];
  const [vMin, vMax] = [Math.min(...pts), Math.max(...pts)];
  const sx = (t: number) =>
    tMax === tMin ? width / 2 : ((t - tMin) / (tMax - tMin)) * (width - 20) + 10;
  const sy = (v: number) =>
    vMax === vMin
      ? height / 2
      : height - (((v - vMin) / (vMax - vMin)) * (height - 20) + 10);
  series.forEach((s, i) => {
    const points = s.t
      .map((t, j) => [t, s.values[j]] as const)
      .filter(([, v]) => Number.isFinite(v))
      .map(([t, v]) => `${sx(t).toFixed(1)},${sy(v).toFixed(1)}`)
      .join(' ');
    svg.appendChild(
      svgEl('polyline', {
        points,
        fill: 'none',
        stroke: PALETTE[i % PALETTE.length],
        'stroke-width': '1.5',
      }),
    );
  });
  return svg;
}

async function showRun(client: WorkbenchClient, runId: string, root: HTMLElement) {
  root.replaceChildren(el('p', `run ${runId}: waiting…`));
  const record = await client.waitForRun(runId);
  if (record.state === 'failed') {
    root.replaceChildren(el('p', `run failed: ${record.error}`));
    return;
  }
  root.replaceChildren();

  const preds = await client.predictions(runId, { cumulative: true });
  const chart = buildPredictionChart(preds);
  root.appendChild(el('h2', 'Predicted lines'));
  root.appendChild(renderLines(chart.lines));
  if (chart.cumulative) {
    root.appendChild(el('h2', 'Cumulative'));
    root.appendChild(renderLines([chart.cumulative]));
  }

  const importance = await client.importance(runId);
  root.appendChild(el('h2', `Importance (${importance.score})`));
  const grid = el('div');
  grid.style.display = 'flex';
  grid.style.flexWrap = 'wrap';
  for (const model of buildDoughnuts(importance)) {
    grid.appendChild(renderDoughnut(model));
  }
  root.appendChild(grid);
}

export function mount(root: HTMLElement): void {
  const form = el('form');
  const base = el('input');
  base.value = 'http://localhost:8000';
  base.size = 30;
  const runId = el('input');
  runId.placeholder = 'run id';
  const go = el('button', 'Load run');
  form.append(base, runId, go);
  const view = el('div');
  root.append(form, view);
  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const client = new WorkbenchClient(base.value);
    showRun(client, runId.value.trim(), view).catch((err) => {
      view.replaceChildren(el('p', String(err)));
    });
  });
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mount(document.getElementById('app')!);
}
