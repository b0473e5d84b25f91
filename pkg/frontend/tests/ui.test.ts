// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { ScenarioStore } from '../src/store.js';
import {
  renderAreaBrowser,
  renderAteTable,
  renderConnectionBanner,
  renderDeltaTable,
  renderInterventionPanel,
} from '../src/ui.js';
import { levelColor } from '../src/tables.js';
import {
  AREAS,
  fixtureAte,
  grassHalvedReport,
  mockFetch,
  zeroReport,
} from './helpers.js';

let container: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '';
  container = document.createElement('div');
  document.body.appendChild(container);
});

function storeWithScenario(report: () => unknown) {
  const { impl } = mockFetch([
    [/\/api\/areas$/, () => AREAS],
    [/\/assessment$/, () => ({
      area_id: 'residential-000000', tnl: 0.5, nld: 0.4, nlsd: 0.01,
      score: 0.91, level: 2, members: [],
    })],
    [/\/api\/scenario$/, report],
  ]);
  return new ScenarioStore(new ApiClient('', impl));
}

describe('delta table rendering', () => {
  it('renders exactly the numbers from the grass-0.5 report', async () => {
    const report = grassHalvedReport();
    const store = storeWithScenario(() => report);
    await store.selectArea('residential-000000');
    store.setSlider('grass', 0.5);
    await store.apply();
    renderDeltaTable(container, store.getState());

    const entry = report.areas[0];
    for (const metric of ['tnl', 'nld', 'nlsd', 'score', 'level'] as const) {
      const row = container.querySelector(`tr[data-metric="${metric}"]`)!;
      const cells = row.querySelectorAll('td');
      expect(Number(cells[1].textContent)).toBe(entry.before[metric]);
      expect(Number(cells[2].textContent)).toBe(entry.after![metric]);
      expect(Number(cells[3].textContent)).toBe(entry.delta[metric]);
    }
  });

  it('renders an all-zero table for identity sliders', async () => {
    const store = storeWithScenario(() => zeroReport());
    await store.selectArea('residential-000001');
    await store.apply(); // sliders untouched -> empty action list
    renderDeltaTable(container, store.getState());
    const deltas = [...container.querySelectorAll('td.delta')].map((td) => Number(td.textContent));
    expect(deltas).toHaveLength(5);
    expect(deltas.every((d) => d === 0)).toBe(true);
  });
});

describe('area browser', () => {
  it('shows every area with its level badge color', async () => {
    const store = storeWithScenario(() => zeroReport());
    await store.loadAreas();
    renderAreaBrowser(container, store.getState(), () => undefined);
    const items = container.querySelectorAll('li.area');
    expect(items).toHaveLength(AREAS.length);
    items.forEach((item, idx) => {
      const badge = item.querySelector('.level-badge') as HTMLElement;
      expect(badge.style.backgroundColor).toBe(levelColor(AREAS[idx].level));
      expect(item.textContent).toContain(AREAS[idx].area_id);
    });
  });

  it('clicking an item selects the area', async () => {
    const store = storeWithScenario(() => zeroReport());
    await store.loadAreas();
    let picked: string | null = null;
    renderAreaBrowser(container, store.getState(), (areaId) => {
      picked = areaId;
    });
    (container.querySelector('li.area') as HTMLElement).click();
    expect(picked).toBe(AREAS[0].area_id);
  });
});

describe('intervention panel', () => {
  it('disables apply while a request is in flight', async () => {
    const store = storeWithScenario(() => zeroReport());
    await store.selectArea('residential-000000');
    let state = { ...store.getState(), applying: true };
    renderInterventionPanel(container, state, store);
    const button = container.querySelector('button.apply') as HTMLButtonElement;
    expect(button.hasAttribute('disabled')).toBe(true);
    state = { ...state, applying: false };
    renderInterventionPanel(container, state, store);
    expect(
      (container.querySelector('button.apply') as HTMLButtonElement).hasAttribute('disabled'),
    ).toBe(false);
  });

  it('shows the server message for a rejected spec', async () => {
    const store = storeWithScenario(() => zeroReport());
    await store.selectArea('residential-000000');
    const state = { ...store.getState(), applyError: "unknown action 'scalentl'" };
    renderInterventionPanel(container, state, store);
    expect(container.querySelector('.field-error')?.textContent).toBe(
      "unknown action 'scalentl'",
    );
  });
});

describe('connection banner', () => {
  it('is visible with a retry button when the service is unreachable', () => {
    const store = storeWithScenario(() => zeroReport());
    let retried = 0;
    renderConnectionBanner(
      container,
      { ...store.getState(), connectionError: 'fetch failed' },
      () => {
        retried += 1;
      },
    );
    expect(container.querySelector('.banner')?.textContent).toContain('service unreachable');
    (container.querySelector('button.retry') as HTMLElement).click();
    expect(retried).toBe(1);
  });

  it('is empty when the connection works', () => {
    const store = storeWithScenario(() => zeroReport());
    renderConnectionBanner(container, store.getState(), () => undefined);
    expect(container.innerHTML).toBe('');
  });
});

describe('ate table', () => {
  it('renders nine rows with server stars and resorts on header click', () => {
    let sortKey: 'theta_abs' | 'p' | 'treatment' = 'theta_abs';
    const draw = () =>
      renderAteTable(container, fixtureAte(), sortKey, (key) => {
        sortKey = key;
        draw();
      });
    draw();
    expect(container.querySelectorAll('tr').length).toBe(10); // header + 9
    const firstTheta = Number(container.querySelector('td.theta')?.textContent);
    expect(Math.abs(firstTheta)).toBe(0.53);
    const stars = [...container.querySelectorAll('td.stars')].map((td) => td.textContent);
    expect(stars).toContain('***');
    (container.querySelector('th[data-sort="treatment"]') as HTMLElement).click();
    const firstCell = container.querySelector('tr + tr td')?.textContent;
    expect(firstCell).toBe('count');
  });
});
