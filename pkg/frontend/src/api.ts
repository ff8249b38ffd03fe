/** Thin fetch client for the review API; the server is the source of truth. */

import type { Dimension, JudgmentValue, Progress, SessionResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The (evaluator, item, dimension) judgment already exists server-side. */
export class DuplicateJudgmentError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "DuplicateJudgmentError";
  }
}

async function detail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    return typeof body.detail === "string" ? body.detail : resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export class ReviewApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async nextItem(evaluator: string): Promise<SessionResponse> {
    const url = `${this.baseUrl}/session/next?evaluator=${encodeURIComponent(evaluator)}`;
    const resp = await this.fetchFn(url);
    if (!resp.ok) {
      throw new ApiError(resp.status, await detail(resp));
    }
    return (await resp.json()) as SessionResponse;
  }

  async submitJudgment(
    evaluator: string,
    itemId: string,
    dimension: Dimension,
    value: JudgmentValue,
  ): Promise<Progress> {
    const resp = await this.fetchFn(`${this.baseUrl}/judgment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ evaluator, item_id: itemId, dimension, value }),
    });
    if (resp.status === 409) {
      throw new DuplicateJudgmentError(await detail(resp));
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, await detail(resp));
    }
    const body = (await resp.json()) as { progress: Progress };
    return body.progress;
  }

  async tallies(): Promise<unknown> {
    const resp = await this.fetchFn(`${this.baseUrl}/tallies`);
    if (!resp.ok) {
      throw new ApiError(resp.status, await detail(resp));
    }
    return resp.json();
  }
}
