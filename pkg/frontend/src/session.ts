/** Rating session state machine.
 *
 * Drives the strict next-pair / vote sequence: exactly one request in
 * flight at any time, advancing only on a 2xx submit. A vote that
 * fails with a rejection re-presents the same pair unchanged; a vote
 * that fails at the network level stays queued with its original
 * idempotency nonce and is resubmitted by retry(), so a retry can
 * never store a second copy.
 */

import { NetworkFailure, RequestRejected, type RatingClient } from "./api.js";
import type { PairView, Side, VotePayload } from "./types.js";

export type SessionState =
  | { kind: "loading" }
  | { kind: "pair"; pair: PairView; notice?: string }
  | { kind: "submitting"; pair: PairView; choice: Side }
  | { kind: "offline"; reason: string; hasQueuedVote: boolean }
  | { kind: "done"; votesCast: number };

export type StateListener = (state: SessionState) => void;

function defaultNonce(): string {
  return crypto.randomUUID();
}

export class RatingSession {
  readonly raterId: string;

  private readonly api: RatingClient;
  private readonly makeNonce: () => string;
  private listeners: StateListener[] = [];
  private current: SessionState = { kind: "loading" };
  private queuedVote: VotePayload | null = null;
  private lastPair: PairView | null = null;
  private cast = 0;

  constructor(api: RatingClient, raterId: string, makeNonce: () => string = defaultNonce) {
    this.api = api;
    this.raterId = raterId;
    this.makeNonce = makeNonce;
  }

  get state(): SessionState {
    return this.current;
  }

  get votesCast(): number {
    return this.cast;
  }

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  private setState(state: SessionState): void {
    this.current = state;
    for (const listener of this.listeners) listener(state);
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Record a choice for the currently shown pair.
   *
   * Ignored unless a pair is actually displayed, which makes rapid
   * double-clicks collapse to the single in-flight submission.
   */
  async choose(side: Side): Promise<void> {
    if (this.current.kind !== "pair") return;
    const pair = this.current.pair;
    this.queuedVote = {
      pair_id: pair.pair_id,
      rater_id: this.raterId,
      choice: side,
      left_model: pair.left.model,
      right_model: pair.right.model,
      nonce: this.makeNonce(),
    };
    await this.submitQueued(pair, side);
  }

  /** Resubmit a queued vote or refetch after a network failure. */
  async retry(): Promise<void> {
    if (this.current.kind !== "offline") return;
    if (this.queuedVote !== null && this.lastPair !== null) {
      await this.submitQueued(this.lastPair, this.queuedVote.choice);
    } else {
      await this.advance();
    }
  }

  private async advance(): Promise<void> {
    this.setState({ kind: "loading" });
    try {
      const pair = await this.api.fetchNextPair(this.raterId);
      if (pair === null) {
        this.setState({ kind: "done", votesCast: this.cast });
      } else {
        this.lastPair = pair;
        this.setState({ kind: "pair", pair });
      }
    } catch (error) {
      if (error instanceof NetworkFailure) {
        this.setState({ kind: "offline", reason: error.message, hasQueuedVote: false });
      } else {
        throw error;
      }
    }
  }

  private async submitQueued(pair: PairView, choice: Side): Promise<void> {
    if (this.queuedVote === null) return;
    this.setState({ kind: "submitting", pair, choice });
    try {
      await this.api.submitVote(this.queuedVote);
      // "duplicate" also means this nonce's vote is safely stored
      this.cast += 1;
      this.queuedVote = null;
      await this.advance();
    } catch (error) {
      if (error instanceof RequestRejected) {
        // the service refused the vote; show the same pair again
        this.queuedVote = null;
        this.setState({ kind: "pair", pair, notice: error.detail });
      } else if (error instanceof NetworkFailure) {
        // keep the vote (same nonce) queued for retry
        this.setState({ kind: "offline", reason: error.message, hasQueuedVote: true });
      } else {
        throw error;
      }
    }
  }
}
