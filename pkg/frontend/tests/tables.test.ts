import { describe, expect, it } from 'vitest';

import { ateRows, deltaTableRows, levelColor, LEVEL_COLORS, sortAteRows } from '../src/tables.js';
import { fixtureAte, grassHalvedReport, zeroReport } from './helpers.js';

describe('deltaTableRows', () => {
  it('copies every number verbatim from the report JSON', () => {
    const report = grassHalvedReport();
    const rows = deltaTableRows(report, 'residential-000000');
    const entry = report.areas[0];
    expect(rows).toHaveLength(5);
    for (const row of rows) {
      expect(row.before).toBe(entry.before[row.metric]);
      expect(row.after).toBe(entry.after![row.metric]);
      expect(row.delta).toBe(entry.delta[row.metric]);
    }
  });

  it('returns all-zero deltas for the identity report', () => {
    const rows = deltaTableRows(zeroReport(), 'residential-000001');
    expect(rows.every((r) => r.delta === 0)).toBe(true);
  });

  it('returns no rows for an unknown area', () => {
    expect(deltaTableRows(zeroReport(), 'nope')).toEqual([]);
  });
});

describe('ate table', () => {
  it('flattens the blocks with server-sent stars untouched', () => {
    const resp = fixtureAte();
    const rows = ateRows(resp);
    expect(rows).toHaveLength(9);
    for (const row of rows) {
      const i = resp.treatment_names.indexOf(row.treatment);
      const j = resp.outcome_names.indexOf(row.outcome);
      expect(row.theta).toBe(resp.theta[i][j]);
      expect(row.stars).toBe(resp.stars[i][j]);
      expect(row.p).toBe(resp.p[i][j]);
    }
  });

  it('sorts by absolute theta descending', () => {
    const rows = sortAteRows(ateRows(fixtureAte()), 'theta_abs');
    const magnitudes = rows.map((r) => Math.abs(r.theta));
    for (let i = 1; i < magnitudes.length; i++) {
      expect(magnitudes[i]).toBeLessThanOrEqual(magnitudes[i - 1]);
    }
    expect(rows[0].theta).toBe(0.53);
  });

  it('star strings agree with the p-value thresholds the server uses', () => {
    for (const row of ateRows(fixtureAte())) {
      const expected = row.p < 0.01 ? '***' : row.p < 0.05 ? '**' : row.p < 0.1 ? '*' : '';
      expect(row.stars).toBe(expected);
    }
  });
});

describe('levelColor', () => {
  it('matches the legend mapping exactly', () => {
    LEVEL_COLORS.forEach((color, level) => {
      expect(levelColor(level)).toBe(color);
    });
    expect(levelColor(null)).toBe('#999999');
    expect(levelColor(99)).toBe(LEVEL_COLORS[LEVEL_COLORS.length - 1]);
  });
});
