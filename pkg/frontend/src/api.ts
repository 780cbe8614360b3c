// Typed client for the matchaudit HTTP API. The UI renders these payloads
// verbatim; it never recomputes disparities or flags on the client side.

export type GroupRef = string | [string, string];

export interface ConfusionCells {
  tp: number;
  fp: number;
  fn: number;
  tn: number;
}

export interface AuditEntry {
  matcher: string;
  paradigm: string;
  measure: string;
  group: GroupRef;
  group_value: number | null;
  overall_value: number | null;
  disparity: number | null;
  mode: string;
  unfair: boolean;
  support: ConfusionCells;
  annotation: string;
}

export interface AuditReport {
  config: Record<string, unknown>;
  entries: AuditEntry[];
  overall: Record<string, Record<string, number | null>>;
}

export interface MultiworkloadRow {
  matcher: string;
  measure: string;
  group: GroupRef;
  k: number;
  mean: number | null;
  std: number | null;
  z: number | null;
  p_value: number | null;
  reject: boolean | null;
  alpha_sig: number;
  theta_fair: number;
  annotation: string;
}

export interface MultiworkloadReport {
  k: number;
  seed: number;
  alpha_sig: number;
  config: Record<string, unknown>;
  rows: MultiworkloadRow[];
}

export interface SubgroupRow {
  group: string;
  value: number | null;
  disparity: number | null;
  support: ConfusionCells;
  low_support: boolean;
}

export interface ExplanationDoc {
  query: Record<string, unknown>;
  subgroup_breakdown: { reason: string; children: SubgroupRow[] };
  measure_breakdown: {
    cells: ConfusionCells;
    rates: Record<string, number | null>;
    disparity: number | null;
    driver: string | null;
    counterfactuals: Record<string, number | null>;
  };
  representation: {
    split: string;
    entity_share: number | null;
    pair_share: number | null;
    match_share: number | null;
    non_match_share: number | null;
    counts: Record<string, number>;
    annotation: string;
  };
  examples: { annotation: string; items: Array<Record<string, unknown>> };
}

export interface ResolutionPoint {
  F: number;
  A: number;
  assignment: Record<string, string>;
  per_group: Array<{ group: string; matcher: string; value: number; support: number }>;
}

export interface Resolution {
  config: {
    measure: string;
    orientation: string;
    mode: string;
    cap: number;
    target_group: string | null;
    seed: number;
  };
  groups: string[];
  matchers: string[];
  points: ResolutionPoint[];
  frontier_indices: number[];
  best_per_group_index: number;
  diagnostics: Record<string, unknown>;
}

export interface StrategyReport {
  assignment: Record<string, string>;
  config: Record<string, unknown>;
  entries: AuditEntry[];
  overall: Record<string, number | null>;
}

export interface SessionSummary {
  state: string;
  mode: string | null;
  tables?: { left: number; right: number };
  splits?: Record<string, { pairs: number; matches: number }>;
  subgroups?: string[];
  matchers: string[];
}

export interface MatcherInfo {
  matcher_id: string;
  family: string;
  description: string;
  trained: boolean;
}

export interface JobStatus {
  job_id: string;
  kind: string;
  state: string;
  progress: number;
  error: string | null;
  result: Record<string, unknown> | null;
}

export interface AuditRequest {
  paradigm?: string;
  measures?: string[];
  tau_match?: number;
  theta_fair?: number;
  mode?: string;
  unfair_only?: boolean;
  min_support?: number;
}

export interface ExplainRequest {
  matcher_id: string;
  group: GroupRef;
  measure_id: string;
  paradigm?: string;
  sample_size?: number;
  seed?: number;
  split?: string;
}

export interface ResolveRequest {
  measure_id: string;
  mode?: string;
  cap?: number;
  target_group?: string | null;
  seed?: number;
  orientation?: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let code = "http_error";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { detail?: { code?: string; message?: string } };
    if (body.detail) {
      code = body.detail.code ?? code;
      message = body.detail.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(): Promise<{ session_id: string }> {
    return this.post("/sessions", {});
  }

  sessionSummary(sid: string): Promise<SessionSummary> {
    return this.request(`/sessions/${sid}`);
  }

  uploadDataset(sid: string, form: FormData): Promise<SessionSummary> {
    return this.request(`/sessions/${sid}/dataset`, { method: "POST", body: form });
  }

  demoDataset(profile: string, seed: number): Promise<{
    session_id: string;
    meta: Record<string, unknown>;
    summary: SessionSummary;
  }> {
    return this.post("/demo/datasets", { profile, seed });
  }

  matcherCatalog(sid: string): Promise<{ matchers: MatcherInfo[] }> {
    return this.request(`/sessions/${sid}/matchers`);
  }

  startMatch(sid: string, matcherIds: string[], seed: number): Promise<{ job_id: string }> {
    return this.post(`/sessions/${sid}/match`, { matcher_ids: matcherIds, seed });
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request(`/jobs/${jobId}`);
  }

  runAudit(sid: string, body: AuditRequest): Promise<AuditReport> {
    return this.post(`/sessions/${sid}/audit`, body);
  }

  runMultiworkload(sid: string, k: number, seed: number, alphaSig: number): Promise<MultiworkloadReport> {
    return this.post(`/sessions/${sid}/audit/multiworkload`, { k, seed, alpha_sig: alphaSig });
  }

  explain(sid: string, body: ExplainRequest): Promise<ExplanationDoc> {
    return this.post(`/sessions/${sid}/explain`, body);
  }

  resolve(sid: string, body: ResolveRequest): Promise<Resolution> {
    return this.post(`/sessions/${sid}/resolve`, body);
  }

  auditStrategy(sid: string, assignment: Record<string, string>): Promise<StrategyReport> {
    return this.post(`/sessions/${sid}/resolve/strategy`, { assignment });
  }
}

export function groupLabel(group: GroupRef): string {
  return Array.isArray(group) ? group.join(" | ") : group;
}
