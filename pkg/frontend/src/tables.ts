import type { AreaDeltaView, AteResponse, ScenarioReport } from './types.js';

/** Level badge palette, index = level. Frozen so tests can assert the
 * legend mapping byte-for-byte. */
export const LEVEL_COLORS = ['#2c7bb6', '#abd9e9', '#fdae61', '#d7191c', '#7f1010'] as const;

export function levelColor(level: number | null): string {
  if (level === null || level < 0) return '#999999';
  return LEVEL_COLORS[Math.min(level, LEVEL_COLORS.length - 1)];
}

export interface DeltaRow {
  metric: 'tnl' | 'nld' | 'nlsd' | 'score' | 'level';
  before: number | null;
  after: number | null;
  delta: number | null;
}

/** Delta table rows for one area, copied verbatim from the report JSON.
 * No arithmetic happens here: before/after/delta are server fields. */
export function deltaTableRows(report: ScenarioReport, areaId: string): DeltaRow[] {
  const entry = report.areas.find((a) => a.area_id === areaId);
  if (!entry) return [];
  return rowsFromEntry(entry);
}

function rowsFromEntry(entry: AreaDeltaView): DeltaRow[] {
  const metrics: DeltaRow['metric'][] = ['tnl', 'nld', 'nlsd', 'score', 'level'];
  return metrics.map((metric) => ({
    metric,
    before: entry.before[metric],
    after: entry.after ? entry.after[metric] : null,
    delta: entry.delta[metric],
  }));
}

export interface AteRow {
  treatment: string;
  outcome: string;
  theta: number;
  stderr: number;
  p: number;
  ciLow: number;
  ciHigh: number;
  stars: string;
}

/** Flatten the 3x3 effect blocks into rows; stars come from the server. */
export function ateRows(resp: AteResponse): AteRow[] {
  const rows: AteRow[] = [];
  resp.treatment_names.forEach((treatment, i) => {
    resp.outcome_names.forEach((outcome, j) => {
      rows.push({
        treatment,
        outcome,
        theta: resp.theta[i][j],
        stderr: resp.stderr[i][j],
        p: resp.p[i][j],
        ciLow: resp.ci_low[i][j],
        ciHigh: resp.ci_high[i][j],
        stars: resp.stars[i][j],
      });
    });
  });
  return rows;
}

export type AteSortKey = 'theta_abs' | 'p' | 'treatment';

export function sortAteRows(rows: AteRow[], key: AteSortKey): AteRow[] {
  const sorted = [...rows];
  if (key === 'theta_abs') {
    sorted.sort((a, b) => Math.abs(b.theta) - Math.abs(a.theta));
  } else if (key === 'p') {
    sorted.sort((a, b) => a.p - b.p);
  } else {
    sorted.sort((a, b) =>
      a.treatment === b.treatment
        ? a.outcome.localeCompare(b.outcome)
        : a.treatment.localeCompare(b.treatment),
    );
  }
  return sorted;
}

export function formatNumber(value: number | null): string {
  if (value === null) return '-';
  if (Number.isInteger(value)) return String(value);
  return value.toPrecision(6);
}
