/** Thin typed client for the rating service HTTP API. */

import type { PairView, ResultsPayload, VotePayload } from "./types.js";

/** The request never reached the service (offline, DNS, aborted). */
export class NetworkFailure extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${String(cause)}`);
    this.name = "NetworkFailure";
  }
}

/** The service answered with a non-2xx status. */
export class RequestRejected extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`request rejected (${status}): ${detail}`);
    this.name = "RequestRejected";
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** What the session and UI need from the service. */
export interface RatingClient {
  fetchNextPair(raterId: string): Promise<PairView | null>;
  submitVote(vote: VotePayload): Promise<"recorded" | "duplicate">;
  fetchResults(): Promise<ResultsPayload>;
}

async function rejectionDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || `status ${response.status}`;
  }
}

export class RatingApi implements RatingClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkFailure(cause);
    }
    return response;
  }

  /** Next pair for this rater, or null once every quota is met (204). */
  async fetchNextPair(raterId: string): Promise<PairView | null> {
    const response = await this.request(
      `/api/pairs/next?rater=${encodeURIComponent(raterId)}`,
    );
    if (response.status === 204) return null;
    if (!response.ok) throw new RequestRejected(response.status, await rejectionDetail(response));
    return (await response.json()) as PairView;
  }

  /** Submit one vote; resolves to the service's recorded/duplicate verdict. */
  async submitVote(vote: VotePayload): Promise<"recorded" | "duplicate"> {
    const response = await this.request("/api/votes", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(vote),
    });
    if (!response.ok) throw new RequestRejected(response.status, await rejectionDetail(response));
    const body = (await response.json()) as { status?: string };
    return body.status === "duplicate" ? "duplicate" : "recorded";
  }

  async fetchResults(): Promise<ResultsPayload> {
    const response = await this.request("/api/results");
    if (!response.ok) throw new RequestRejected(response.status, await rejectionDetail(response));
    return (await response.json()) as ResultsPayload;
  }
}
