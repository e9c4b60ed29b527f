import {
  AlignmentEnvelope,
  ApiRequestError,
  CandidateEntry,
  EditKind,
  ExportResult,
  StoryboardDoc,
  StoryboardSummary,
} from "./types.js";

async function parseError(response: Response): Promise<ApiRequestError> {
  let code = "error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.error ?? code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiRequestError(response.status, code, message);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  mediaUrl(contentHash: string): string {
    return `${this.baseUrl}/media/${contentHash}`;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/health");
  }

  async listStoryboards(): Promise<StoryboardSummary[]> {
    const body = await this.request<{ storyboards: StoryboardSummary[] }>(
      "/api/storyboards",
    );
    return body.storyboards;
  }

  getStoryboard(id: string): Promise<StoryboardDoc> {
    return this.request(`/api/storyboards/${encodeURIComponent(id)}`);
  }

  getAlignment(id: string): Promise<AlignmentEnvelope> {
    return this.request(`/api/alignments/${encodeURIComponent(id)}`);
  }

  async candidates(
    alignmentId: string,
    slotIndex: number,
    k?: number,
  ): Promise<CandidateEntry[]> {
    const query = k === undefined ? "" : `?k=${k}`;
    const body = await this.request<{ candidates: CandidateEntry[] }>(
      `/api/alignments/${encodeURIComponent(alignmentId)}` +
        `/slots/${slotIndex}/candidates${query}`,
    );
    return body.candidates;
  }

  recompute(
    id: string,
    params: { alpha?: number; strategy?: string },
  ): Promise<AlignmentEnvelope> {
    return this.request(`/api/alignments/${encodeURIComponent(id)}/recompute`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    });
  }

  submitEdit(
    storyboardId: string,
    edit: { kind: EditKind; a?: number; b?: number; version: number },
  ): Promise<StoryboardSummary> {
    return this.request(
      `/api/storyboards/${encodeURIComponent(storyboardId)}/edits`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ a: 0, b: 0, ...edit }),
      },
    );
  }

  exportStoryboard(storyboardId: string): Promise<ExportResult> {
    return this.request(
      `/api/storyboards/${encodeURIComponent(storyboardId)}/export`,
      { method: "POST" },
    );
  }
}
