/** Wire types mirroring the rating service's JSON payloads exactly. */

export type Side = "left" | "right";

export interface PairSide {
  model: string;
  image_url: string;
}

/** Payload of GET /api/pairs/next. */
export interface PairView {
  pair_id: string;
  prompt: string;
  left: PairSide;
  right: PairSide;
}

/** Body of POST /api/votes. */
export interface VotePayload {
  pair_id: string;
  rater_id: string;
  choice: Side;
  left_model: string;
  right_model: string;
  nonce: string;
}

export interface Comparison {
  candidate: string;
  alternative: string;
  rate: number;
  ci_low: number;
  ci_high: number;
  n_votes: number;
}

export interface ResultsMetadata {
  prompt: string;
  quota: number;
  total_votes: number;
  bootstrap_over: string;
  confidence: number;
  n_resamples: number;
  seed: number;
  rater_policy: string;
}

/** Payload of GET /api/results. */
export interface ResultsPayload {
  comparisons: Comparison[];
  metadata: ResultsMetadata;
}
