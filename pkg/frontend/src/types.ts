/** Shapes of the JSON the scenario service returns. The UI never computes
 * indices itself; every displayed number comes from one of these fields. */

export const CATEGORIES = [
  'brownfield',
  'commercial',
  'construction',
  'farmland',
  'forest',
  'grass',
  'industrial',
  'residential',
  'retail',
] as const;

export type Category = (typeof CATEGORIES)[number];

export interface AreaSummary {
  area_id: string;
  center_lon: number;
  center_lat: number;
  score: number;
  level: number | null;
}

export interface MemberInfluence {
  poi_id: string;
  category: Category;
  ntl: number;
  influence: number;
}

export interface AreaAssessment {
  area_id: string;
  tnl: number;
  nld: number;
  nlsd: number;
  score: number;
  level: number | null;
  members: MemberInfluence[];
}

export interface IndicesView {
  tnl: number;
  nld: number;
  nlsd: number;
  score: number;
  level: number | null;
}

export interface AreaDeltaView {
  area_id: string;
  before: IndicesView;
  after: IndicesView | null;
  delta: {
    tnl: number | null;
    nld: number | null;
    nlsd: number | null;
    score: number | null;
    level: number | null;
  };
}

export interface ScenarioReport {
  session_id: string;
  areas: AreaDeltaView[];
  hist_before: number[];
  hist_after: number[];
  kl: number;
  map_metrics: Record<string, { mae: number | string; psnr: number | string; rase: number | string }>;
}

export interface ScaleAction {
  op: 'scale_ntl';
  category: Category;
  factor: number;
}

export interface SetAction {
  op: 'set_ntl';
  category: Category;
  value: number;
}

export type Action = ScaleAction | SetAction;

export interface AteResponse {
  category: Category;
  treatment_names: string[];
  outcome_names: string[];
  theta: number[][];
  stderr: number[][];
  p: number[][];
  ci_low: number[][];
  ci_high: number[][];
  stars: string[][];
}
