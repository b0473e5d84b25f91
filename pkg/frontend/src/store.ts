import { ApiClient, ApiError } from './api.js';
import type { Action, AreaAssessment, AreaSummary, Category, ScenarioReport } from './types.js';
import { CATEGORIES } from './types.js';

export interface ScenarioState {
  areas: AreaSummary[];
  selectedArea: string | null;
  assessment: AreaAssessment | null;
  sliders: Record<Category, number>;
  report: ScenarioReport | null;
  beforeMapUrl: string | null;
  afterMapUrl: string | null;
  applying: boolean;
  connectionError: string | null;
  applyError: string | null;
}

export function defaultSliders(): Record<Category, number> {
  const sliders = {} as Record<Category, number>;
  for (const cat of CATEGORIES) sliders[cat] = 1.0;
  return sliders;
}

export function clampFactor(value: number): number {
  if (Number.isNaN(value)) return 1.0;
  return Math.min(2.0, Math.max(0.0, value));
}

/** Actions for the sliders that moved away from the identity factor. */
export function composeSpec(sliders: Record<Category, number>): Action[] {
  const actions: Action[] = [];
  for (const cat of CATEGORIES) {
    if (sliders[cat] !== 1.0) {
      actions.push({ op: 'scale_ntl', category: cat, factor: sliders[cat] });
    }
  }
  return actions;
}

type Listener = (state: ScenarioState) => void;

/** UI state container. At most one scenario request is rendered at a time:
 * every apply bumps a sequence number and responses that come back for an
 * older sequence are dropped. */
export class ScenarioStore {
  private state: ScenarioState = {
    areas: [],
    selectedArea: null,
    assessment: null,
    sliders: defaultSliders(),
    report: null,
    beforeMapUrl: null,
    afterMapUrl: null,
    applying: false,
    connectionError: null,
    applyError: null,
  };

  private seq = 0;
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  getState(): ScenarioState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<ScenarioState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  async loadAreas(): Promise<void> {
    try {
      const areas = await this.api.listAreas();
      this.update({ areas, connectionError: null });
    } catch (err) {
      this.update({ connectionError: describe(err) });
    }
  }

  /** Select an area: one assessment fetch per selection, baseline map URL set. */
  async selectArea(areaId: string): Promise<void> {
    this.update({
      selectedArea: areaId,
      assessment: null,
      report: null,
      afterMapUrl: null,
      beforeMapUrl: this.api.baselineMapUrl(areaId),
    });
    try {
      const assessment = await this.api.areaAssessment(areaId);
      if (this.state.selectedArea === areaId) {
        this.update({ assessment, connectionError: null });
      }
    } catch (err) {
      this.update({ connectionError: describe(err) });
    }
  }

  setSlider(category: Category, value: number): void {
    this.update({ sliders: { ...this.state.sliders, [category]: clampFactor(value) } });
  }

  resetSliders(): void {
    this.update({ sliders: defaultSliders() });
  }

  /** POST the composed spec. Stale responses (an apply that was superseded
   * by a newer one) never reach the state. */
  async apply(): Promise<void> {
    const mySeq = ++this.seq;
    this.update({ applying: true, applyError: null });
    let report: ScenarioReport;
    try {
      report = await this.api.postScenario(composeSpec(this.state.sliders));
    } catch (err) {
      if (mySeq === this.seq) {
        this.update({ applying: false, applyError: describe(err) });
      }
      return;
    }
    if (mySeq !== this.seq) {
      return; // a newer apply is in flight or already rendered
    }
    const selected = this.state.selectedArea;
    this.update({
      report,
      applying: false,
      afterMapUrl: selected ? this.api.scenarioMapUrl(selected, report.session_id) : null,
    });
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return err.message;
  return String(err);
}
