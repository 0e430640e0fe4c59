import type { DecisionRequest, ListResponse, VerifyItem } from "./types";

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let message = `${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, message);
}

/** Thin typed wrapper over the verification service HTTP API. */
export class ApiClient {
  constructor(
    private readonly fetchFn: FetchFn,
    private readonly base = "",
  ) {}

  async listPending(pageSize = 200): Promise<ListResponse> {
    const resp = await this.fetchFn(
      `${this.base}/api/items?status=pending&page_size=${pageSize}`,
    );
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as ListResponse;
  }

  async decide(request: DecisionRequest): Promise<VerifyItem> {
    const resp = await this.fetchFn(`${this.base}/api/decisions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as VerifyItem;
  }

  audioUrl(itemId: string): string {
    return `${this.base}/api/audio/${encodeURIComponent(itemId)}`;
  }
}
