import type { Action, AreaAssessment, AreaSummary, AteResponse, ScenarioReport } from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the scenario service; fetch is injectable so
 * component tests can mock the server. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const message =
        body && typeof body === 'object' && 'error' in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${resp.status}`;
      throw new ApiError(resp.status, message);
    }
    return body as T;
  }

  listAreas(): Promise<AreaSummary[]> {
    return this.request('/api/areas');
  }

  areaAssessment(areaId: string): Promise<AreaAssessment> {
    return this.request(`/api/areas/${encodeURIComponent(areaId)}/assessment`);
  }

  postScenario(actions: Action[], areas: string[] = []): Promise<ScenarioReport> {
    return this.request('/api/scenario', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ actions, areas }),
    });
  }

  ate(category: string): Promise<AteResponse> {
    return this.request(`/api/ate?category=${encodeURIComponent(category)}`);
  }

  baselineMapUrl(areaId: string): string {
    return `${this.baseUrl}/api/areas/${encodeURIComponent(areaId)}/map`;
  }

  scenarioMapUrl(areaId: string, sessionId: string): string {
    return `${this.baselineMapUrl(areaId)}?scenario=${encodeURIComponent(sessionId)}`;
  }
}
