import type {
  Arc,
  Character,
  ClusterPayload,
  DuplicatePair,
  EpisodeRef,
  PcaPoint,
  RunEvent,
  TimelinePayload,
  Violation,
} from "./types.js";

/** Error carrying the server's violation codes for field-level rendering. */
export class ApiError extends Error {
  status: number;
  violations: Violation[];

  constructor(status: number, message: string, violations: Violation[] = []) {
    super(message);
    this.status = status;
    this.violations = violations;
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let violations: Violation[] = [];
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    const detail = body.detail ?? body;
    if (Array.isArray(detail.violations)) violations = detail.violations;
    if (typeof detail.message === "string") message = detail.message;
    else if (typeof detail.error === "string") message = detail.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, message, violations);
}

/** Thin typed client over the documented JSON endpoints. */
export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) throw await toApiError(response);
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  listSeries(): Promise<{ series: string[] }> {
    return this.request("/api/series");
  }

  timeline(series: string, season: number, filters: { type?: string; character?: string } = {}): Promise<TimelinePayload> {
    const params = new URLSearchParams();
    if (filters.type) params.set("type", filters.type);
    if (filters.character) params.set("character", filters.character);
    const query = params.toString();
    return this.request(`/api/series/${series}/seasons/${season}/arcs${query ? `?${query}` : ""}`);
  }

  getArc(arcId: string): Promise<Arc> {
    return this.request(`/api/arcs/${arcId}`);
  }

  createArc(body: {
    series: string;
    title: string;
    description: string;
    arc_type: string;
    main_characters: string[];
    progressions?: { episode: EpisodeRef; content: string[]; interfering_characters?: string[] }[];
  }): Promise<Arc> {
    return this.request("/api/arcs", { method: "POST", body: JSON.stringify(body) });
  }

  patchArc(arcId: string, patch: Partial<Pick<Arc, "title" | "description" | "arc_type" | "main_characters">>): Promise<Arc> {
    return this.request(`/api/arcs/${arcId}`, { method: "PATCH", body: JSON.stringify(patch) });
  }

  deleteArc(arcId: string): Promise<void> {
    return this.request(`/api/arcs/${arcId}`, { method: "DELETE" });
  }

  mergeArcs(keepId: string, absorbId: string): Promise<Arc> {
    return this.request("/api/arcs/merge", {
      method: "POST",
      body: JSON.stringify({ keep_id: keepId, absorb_id: absorbId }),
    });
  }

  generateProgression(arcId: string, episode: EpisodeRef): Promise<{ episode: EpisodeRef; content: string[]; interfering_characters: string[] }> {
    return this.request(`/api/arcs/${arcId}/progressions/generate`, {
      method: "POST",
      body: JSON.stringify({ episode }),
    });
  }

  addProgression(arcId: string, body: { episode: EpisodeRef; content: string[]; interfering_characters?: string[] }): Promise<Arc> {
    return this.request(`/api/arcs/${arcId}/progressions`, { method: "POST", body: JSON.stringify(body) });
  }

  characters(series: string): Promise<{ characters: Character[] }> {
    return this.request(`/api/series/${series}/characters`);
  }

  duplicateCharacters(series: string, threshold?: number): Promise<{ threshold: number; pairs: DuplicatePair[] }> {
    const query = threshold !== undefined ? `?threshold=${threshold}` : "";
    return this.request(`/api/series/${series}/characters/duplicates${query}`);
  }

  mergeCharacters(keepId: string, dropId: string): Promise<Character> {
    return this.request("/api/characters/merge", {
      method: "POST",
      body: JSON.stringify({ keep_id: keepId, drop_id: dropId }),
    });
  }

  pca(series: string): Promise<{ points: PcaPoint[] }> {
    return this.request(`/api/series/${series}/pca`);
  }

  clusters(series: string, threshold?: number): Promise<ClusterPayload> {
    const query = threshold !== undefined ? `?threshold=${threshold}` : "";
    return this.request(`/api/series/${series}/clusters${query}`);
  }

  startRun(series: string, season: number, mode?: string): Promise<{ run_id: string }> {
    return this.request("/api/pipeline/run", {
      method: "POST",
      body: JSON.stringify({ series, season, mode }),
    });
  }

  /** Stream JSON-lines run events, invoking the callback per event. */
  async streamRunEvents(runId: string, onEvent: (event: RunEvent) => void): Promise<void> {
    const response = await fetch(`${this.baseUrl}/api/pipeline/runs/${runId}/events`);
    if (!response.ok || response.body === null) throw await toApiError(response);
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let newline = buffer.indexOf("\n");
      while (newline >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) onEvent(JSON.parse(line) as RunEvent);
        newline = buffer.indexOf("\n");
      }
    }
    if (buffer.trim()) onEvent(JSON.parse(buffer) as RunEvent);
  }
}
