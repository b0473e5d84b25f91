import { ApiClient } from './api.js';
import { ScenarioStore } from './store.js';
import {
  renderAreaBrowser,
  renderAteTable,
  renderConnectionBanner,
  renderDeltaTable,
  renderInterventionPanel,
  renderMaps,
} from './ui.js';
import type { AteSortKey } from './tables.js';
import type { AteResponse, Category } from './types.js';

function required(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node;
}

export function bootstrap(baseUrl = ''): ScenarioStore {
  const api = new ApiClient(baseUrl);
  const store = new ScenarioStore(api);

  const banner = required('banner');
  const browser = required('area-browser');
  const panel = required('intervention-panel');
  const deltas = required('delta-table');
  const maps = required('maps');
  const ate = required('ate-view');
  const ateSelect = required('ate-category') as HTMLSelectElement;

  let ateSort: AteSortKey = 'theta_abs';
  let ateData: AteResponse | null = null;

  const drawAte = () => {
    ate.innerHTML = '';
    if (ateData) {
      renderAteTable(ate, ateData, ateSort, (key) => {
        ateSort = key;
        drawAte();
      });
    }
  };

  ateSelect.addEventListener('change', () => {
    void api
      .ate(ateSelect.value as Category)
      .then((resp) => {
        ateData = resp;
        drawAte();
      })
      .catch((err) => {
        ate.innerHTML = '';
        const p = document.createElement('p');
        p.className = 'field-error';
        p.textContent = String(err instanceof Error ? err.message : err);
        ate.appendChild(p);
      });
  });

  store.subscribe((state) => {
    renderConnectionBanner(banner, state, () => void store.loadAreas());
    renderAreaBrowser(browser, state, (areaId) => void store.selectArea(areaId));
    renderInterventionPanel(panel, state, store);
    renderDeltaTable(deltas, state);
    renderMaps(maps, state);
  });

  void store.loadAreas();
  return store;
}

if (typeof document !== 'undefined' && document.getElementById('area-browser')) {
  bootstrap();
}
