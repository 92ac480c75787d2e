/**
 * Typed client for the lakemend /v1 job API.
 *
 * Every method maps to one endpoint; nothing here owns UI state. The fetch
 * implementation is injectable so tests can run against an in-memory server.
 */

export interface TableInfo {
  table_id: string;
  name: string;
  columns: string[];
  rows: number;
}

export interface LakeInfo {
  lake_id: string;
  tables: TableInfo[];
  warnings: string[];
}

export interface LakeStatus {
  lake_id: string;
  tables: TableInfo[];
  index: Record<string, string>;
  index_errors: Record<string, string>;
}

export type RelevantColumns = "ALL" | string[];

export interface JobRequest {
  table: string;
  dirty_column: string;
  relevant_columns?: RelevantColumns;
  value?: string;
  datalake?: string | null;
  is_local_model?: boolean;
  indexer?: "syntactic" | "semantic";
  reranker?: "maxsim" | "cross" | "none";
  n?: number;
  k?: number;
  repair?: boolean;
}

export interface JobProgress {
  processed: number;
  total: number;
}

export interface JobStatus {
  job_id: string;
  status: "pending" | "running" | "done" | "failed";
  progress: JobProgress;
  telemetry: Record<string, number>;
  warnings: string[];
  error: string | null;
  config: JobRequest;
}

export interface Lineage {
  table: string;
  row: number;
  attribute: string;
}

export interface TrailEntry {
  table: string;
  row: number;
  matched: boolean;
}

export interface ResultRow {
  row_id: number;
  dirty_column: string;
  existing_value: string | null;
  suggested_value: string | null;
  is_conflict: boolean;
  lineage: Lineage | null;
  trail: TrailEntry[];
}

export interface JobResults {
  status: string;
  partial: boolean;
  results: ResultRow[];
}

export interface SourceAttribute {
  name: string;
  value: string | null;
}

export interface SourceTuple {
  table: string;
  table_name: string;
  row: number;
  attribute: string;
  value: string | null;
  attributes: SourceAttribute[];
}

export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed with ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export interface ClientOptions {
  baseUrl?: string;
  fetchImpl?: typeof fetch;
}

export class Client {
  private baseUrl: string;
  private fetchImpl: typeof fetch;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? "").replace(/\/$/, "");
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let detail: unknown = null;
      try {
        const body = await response.json();
        detail = body?.detail ?? body;
      } catch {
        detail = await response.text().catch(() => null);
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  uploadTable(file: Blob, name: string): Promise<TableInfo> {
    const form = new FormData();
    form.append("file", file, name);
    return this.json<TableInfo>("/v1/tables", { method: "POST", body: form });
  }

  uploadLake(files: Array<{ blob: Blob; name: string }>): Promise<LakeInfo> {
    const form = new FormData();
    for (const f of files) {
      form.append("files", f.blob, f.name);
    }
    return this.json<LakeInfo>("/v1/lakes", { method: "POST", body: form });
  }

  buildIndex(lakeId: string, mode: "syntactic" | "semantic"): Promise<{ status: string }> {
    return this.json(`/v1/lakes/${lakeId}/index`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ mode }),
    });
  }

  lakeStatus(lakeId: string): Promise<LakeStatus> {
    return this.json<LakeStatus>(`/v1/lakes/${lakeId}`);
  }

  submitJob(request: JobRequest): Promise<{ job_id: string }> {
    return this.json("/v1/jobs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.json<JobStatus>(`/v1/jobs/${jobId}`);
  }

  jobResults(jobId: string): Promise<JobResults> {
    return this.json<JobResults>(`/v1/jobs/${jobId}/results`);
  }

  rowSource(jobId: string, rowId: number): Promise<SourceTuple> {
    return this.json<SourceTuple>(`/v1/jobs/${jobId}/results/${rowId}/source`);
  }

  /** Download the cleaned CSV with only the listed rows applied, as raw bytes. */
  async exportCsv(
    jobId: string,
    acceptedRows: number[],
    applyRepairs = false,
  ): Promise<Uint8Array> {
    const params = new URLSearchParams();
    params.set("rows", acceptedRows.join(","));
    if (applyRepairs) {
      params.set("apply_repairs", "true");
    }
    const response = await this.request(`/v1/jobs/${jobId}/export?${params}`);
    return new Uint8Array(await response.arrayBuffer());
  }

  /** Poll a job until it leaves pending/running. Rejects if it failed. */
  async pollJob(
    jobId: string,
    intervalMs = 500,
    onProgress?: (status: JobStatus) => void,
  ): Promise<JobStatus> {
    for (;;) {
      const status = await this.jobStatus(jobId);
      onProgress?.(status);
      if (status.status === "done") {
        return status;
      }
      if (status.status === "failed") {
        throw new ApiError(500, status.error ?? "job failed");
      }
      await sleep(intervalMs);
    }
  }

  /** Poll a lake until the given index mode is ready. Rejects on error state. */
  async pollIndex(
    lakeId: string,
    mode: "syntactic" | "semantic",
    intervalMs = 500,
  ): Promise<LakeStatus> {
    for (;;) {
      const status = await this.lakeStatus(lakeId);
      const state = status.index[mode];
      if (state === "ready") {
        return status;
      }
      if (state === "error") {
        throw new ApiError(500, status.index_errors[mode] ?? "index build failed");
      }
      await sleep(intervalMs);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
