import type { ScenarioState, ScenarioStore } from './store.js';
import { deltaTableRows, formatNumber, levelColor, sortAteRows, ateRows } from './tables.js';
import type { AteResponse } from './types.js';
import type { AteSortKey } from './tables.js';
import { CATEGORIES } from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Banner shown when the service is unreachable; retry reloads the areas. */
export function renderConnectionBanner(
  container: HTMLElement,
  state: ScenarioState,
  onRetry: () => void,
): void {
  container.innerHTML = '';
  if (!state.connectionError) return;
  const banner = el('div', { class: 'banner error', role: 'alert' });
  banner.appendChild(el('span', {}, `service unreachable: ${state.connectionError}`));
  const retry = el('button', { class: 'retry' }, 'retry');
  retry.addEventListener('click', onRetry);
  banner.appendChild(retry);
  container.appendChild(banner);
}

/** Area list with level badges; clicking selects the area. */
export function renderAreaBrowser(
  container: HTMLElement,
  state: ScenarioState,
  onSelect: (areaId: string) => void,
): void {
  container.innerHTML = '';
  const list = el('ul', { class: 'area-list' });
  for (const area of state.areas) {
    const item = el('li', {
      class: area.area_id === state.selectedArea ? 'area selected' : 'area',
      'data-area': area.area_id,
    });
    const badge = el('span', { class: 'level-badge' }, area.level === null ? '?' : String(area.level));
    badge.style.backgroundColor = levelColor(area.level);
    item.appendChild(badge);
    item.appendChild(el('span', { class: 'area-id' }, area.area_id));
    item.appendChild(el('span', { class: 'score' }, formatNumber(area.score)));
    item.addEventListener('click', () => onSelect(area.area_id));
    list.appendChild(item);
  }
  container.appendChild(list);
}

/** Slider per category plus apply; values persist across applies. */
export function renderInterventionPanel(
  container: HTMLElement,
  state: ScenarioState,
  store: ScenarioStore,
): void {
  container.innerHTML = '';
  if (!state.selectedArea) {
    container.appendChild(el('p', { class: 'hint' }, 'select an area to start a scenario'));
    return;
  }
  const form = el('div', { class: 'sliders' });
  for (const cat of CATEGORIES) {
    const row = el('label', { class: 'slider-row' });
    row.appendChild(el('span', { class: 'cat' }, cat));
    const input = el('input', {
      type: 'range',
      min: '0',
      max: '2',
      step: '0.05',
      value: String(state.sliders[cat]),
      'data-category': cat,
    });
    input.addEventListener('input', () => store.setSlider(cat, Number(input.value)));
    row.appendChild(input);
    row.appendChild(el('span', { class: 'factor' }, state.sliders[cat].toFixed(2)));
    form.appendChild(row);
  }
  const apply = el('button', { class: 'apply' }, state.applying ? 'applying...' : 'apply');
  if (state.applying) apply.setAttribute('disabled', 'disabled');
  apply.addEventListener('click', () => void store.apply());
  form.appendChild(apply);
  const reset = el('button', { class: 'reset' }, 'reset sliders');
  reset.addEventListener('click', () => store.resetSliders());
  form.appendChild(reset);
  if (state.applyError) {
    form.appendChild(el('p', { class: 'field-error' }, state.applyError));
  }
  container.appendChild(form);
}

/** Before -> after table for the selected area, straight from the report. */
export function renderDeltaTable(container: HTMLElement, state: ScenarioState): void {
  container.innerHTML = '';
  if (!state.report || !state.selectedArea) return;
  const rows = deltaTableRows(state.report, state.selectedArea);
  if (!rows.length) return;
  const table = el('table', { class: 'delta-table' });
  const head = el('tr');
  for (const h of ['metric', 'before', 'after', 'delta']) head.appendChild(el('th', {}, h));
  table.appendChild(head);
  for (const row of rows) {
    const tr = el('tr', { 'data-metric': row.metric });
    tr.appendChild(el('td', {}, row.metric));
    tr.appendChild(el('td', { class: 'before' }, formatNumber(row.before)));
    tr.appendChild(el('td', { class: 'after' }, formatNumber(row.after)));
    tr.appendChild(el('td', { class: 'delta' }, formatNumber(row.delta)));
    table.appendChild(tr);
  }
  container.appendChild(table);
}

/** Side-by-side baseline and scenario maps. */
export function renderMaps(container: HTMLElement, state: ScenarioState): void {
  container.innerHTML = '';
  if (state.beforeMapUrl) {
    const fig = el('figure');
    fig.appendChild(el('img', { src: state.beforeMapUrl, alt: 'baseline map', class: 'map before' }));
    fig.appendChild(el('figcaption', {}, 'before'));
    container.appendChild(fig);
  }
  if (state.afterMapUrl) {
    const fig = el('figure');
    fig.appendChild(el('img', { src: state.afterMapUrl, alt: 'scenario map', class: 'map after' }));
    fig.appendChild(el('figcaption', {}, 'after'));
    container.appendChild(fig);
  }
}

/** Sortable effect table; stars are rendered exactly as the server sent them. */
export function renderAteTable(
  container: HTMLElement,
  resp: AteResponse,
  sortKey: AteSortKey,
  onSort: (key: AteSortKey) => void,
): void {
  container.innerHTML = '';
  const table = el('table', { class: 'ate-table' });
  const head = el('tr');
  const columns: [string, AteSortKey | null][] = [
    ['treatment', 'treatment'],
    ['outcome', null],
    ['theta', 'theta_abs'],
    ['stderr', null],
    ['p', 'p'],
    ['stars', null],
  ];
  for (const [label, key] of columns) {
    const th = el('th', key ? { class: 'sortable', 'data-sort': key } : {}, label);
    if (key) th.addEventListener('click', () => onSort(key));
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const row of sortAteRows(ateRows(resp), sortKey)) {
    const tr = el('tr');
    tr.appendChild(el('td', {}, row.treatment));
    tr.appendChild(el('td', {}, row.outcome));
    tr.appendChild(el('td', { class: 'theta' }, formatNumber(row.theta)));
    tr.appendChild(el('td', {}, formatNumber(row.stderr)));
    tr.appendChild(el('td', {}, formatNumber(row.p)));
    tr.appendChild(el('td', { class: 'stars' }, row.stars));
    table.appendChild(tr);
  }
  container.appendChild(table);
}
