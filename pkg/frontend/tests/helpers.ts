import type { AreaSummary, AteResponse, ScenarioReport } from '../src/types.js';

export const AREAS: AreaSummary[] = [
  { area_id: 'residential-000000', center_lon: 2.31, center_lat: 48.81, score: 0.91, level: 2 },
  { area_id: 'residential-000001', center_lon: 2.32, center_lat: 48.82, score: 0.35, level: 0 },
];

export function zeroReport(sessionId = 'sess-zero'): ScenarioReport {
  return {
    session_id: sessionId,
    areas: AREAS.map((a) => ({
      area_id: a.area_id,
      before: { tnl: 0.5, nld: 0.4, nlsd: 0.01, score: 0.91, level: 2 },
      after: { tnl: 0.5, nld: 0.4, nlsd: 0.01, score: 0.91, level: 2 },
      delta: { tnl: 0, nld: 0, nlsd: 0, score: 0, level: 0 },
    })),
    hist_before: [1, 0, 1, 0],
    hist_after: [1, 0, 1, 0],
    kl: 0,
    map_metrics: {},
  };
}

export function grassHalvedReport(sessionId = 'sess-grass'): ScenarioReport {
  return {
    session_id: sessionId,
    areas: [
      {
        area_id: 'residential-000000',
        before: { tnl: 0.5, nld: 0.4, nlsd: 0.01, score: 0.91, level: 2 },
        after: { tnl: 0.37, nld: 0.27, nlsd: 0.008, score: 0.648, level: 1 },
        delta: { tnl: -0.13, nld: -0.13, nlsd: -0.002, score: -0.262, level: -1 },
      },
      {
        area_id: 'residential-000001',
        before: { tnl: 0.3, nld: 0.05, nlsd: 0.0, score: 0.35, level: 0 },
        after: { tnl: 0.3, nld: 0.05, nlsd: 0.0, score: 0.35, level: 0 },
        delta: { tnl: 0, nld: 0, nlsd: 0, score: 0, level: 0 },
      },
    ],
    hist_before: [1, 0, 1, 0],
    hist_after: [1, 1, 0, 0],
    kl: 0.1733,
    map_metrics: {},
  };
}

export function fixtureAte(): AteResponse {
  return {
    category: 'grass',
    treatment_names: ['count', 'mean_ntl', 'mean_dist'],
    outcome_names: ['tnl', 'nld', 'nlsd'],
    theta: [
      [0.12, 0.11, 0.01],
      [0.53, 0.49, 0.02],
      [-0.2, -0.18, -0.01],
    ],
    stderr: [
      [0.05, 0.05, 0.02],
      [0.04, 0.05, 0.03],
      [0.06, 0.07, 0.04],
    ],
    p: [
      [0.016, 0.028, 0.62],
      [0.0001, 0.0002, 0.5],
      [0.0008, 0.01, 0.8],
    ],
    ci_low: [
      [0.02, 0.01, -0.03],
      [0.45, 0.39, -0.04],
      [-0.32, -0.32, -0.09],
    ],
    ci_high: [
      [0.22, 0.21, 0.05],
      [0.61, 0.59, 0.08],
      [-0.08, -0.04, 0.07],
    ],
    stars: [
      ['**', '**', ''],
      ['***', '***', ''],
      ['***', '**', ''],
    ],
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

type Responder = (req: RecordedRequest) => Promise<unknown> | unknown;

/** fetch stand-in: route by predicate, record every request. */
export function mockFetch(routes: [RegExp, Responder][], requests: RecordedRequest[] = []) {
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    const req: RecordedRequest = {
      url: input,
      method: init?.method ?? 'GET',
      body: init?.body ? JSON.parse(String(init.body)) : null,
    };
    requests.push(req);
    for (const [pattern, responder] of routes) {
      if (pattern.test(input)) {
        const payload = await responder(req);
        if (payload instanceof Response) return payload;
        return new Response(JSON.stringify(payload), {
          status: 200,
          headers: { 'content-type': 'application/json' },
        });
      }
    }
    return new Response(JSON.stringify({ error: `no route for ${input}` }), { status: 404 });
  };
  return { impl, requests };
}

export function errorResponse(status: number, message: string): Response {
  return new Response(JSON.stringify({ error: message }), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}
