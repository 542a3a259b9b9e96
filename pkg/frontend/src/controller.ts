/** Polling state machine between the session service and the view.
 *
 * One query is displayed at a time, mirroring the sequential averaging
 * loop. Submissions are serialized: while one is in flight, further
 * clicks are ignored, so a double-click can never record two answers.
 * A stale-query conflict (someone else answered first) refreshes the
 * display instead of erroring out.
 */

import {
  AnswerChoice,
  ApiClient,
  PendingResponse,
  QueryView,
  ResultResponse,
} from "./api.js";

export interface SessionView {
  showIdle(status: string): void;
  showQuery(query: QueryView, history: PendingResponse["history"]): void;
  showFinished(result: ResultResponse): void;
  showTerminal(status: string): void;
  showNotice(message: string): void;
  clearNotice(): void;
}

const TERMINAL_STATUSES = new Set(["timed_out", "failed"]);

export class SessionController {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private submitting = false;
  private displayedQueryId: number | null = null;
  private currentQuery: QueryView | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly sessionId: string,
    private readonly view: SessionView,
    private readonly pollIntervalMs = 1000,
  ) {}

  start(): void {
    this.stopped = false;
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  /** The query the view is currently showing, if any. */
  get pendingQuery(): QueryView | null {
    return this.currentQuery;
  }

  get isSubmitting(): boolean {
    return this.submitting;
  }

  async tick(): Promise<void> {
    if (this.stopped) {
      return;
    }
    try {
      const pending = await this.client.getPending(this.sessionId);
      this.view.clearNotice();
      await this.apply(pending);
    } catch (error) {
      this.view.showNotice(`connection problem, retrying: ${String(error)}`);
    }
    if (!this.stopped) {
      if (this.timer !== null) {
        clearTimeout(this.timer);
      }
      this.timer = setTimeout(() => void this.tick(), this.pollIntervalMs);
    }
  }

  private async apply(pending: PendingResponse): Promise<void> {
    if (pending.status === "finished") {
      this.stop();
      this.currentQuery = null;
      const result = await this.client.getResult(this.sessionId);
      this.view.showFinished(result);
      return;
    }
    if (TERMINAL_STATUSES.has(pending.status)) {
      this.stop();
      this.currentQuery = null;
      this.view.showTerminal(pending.status);
      return;
    }
    if (pending.query === null) {
      this.currentQuery = null;
      this.displayedQueryId = null;
      this.view.showIdle(pending.status);
      return;
    }
    this.currentQuery = pending.query;
    if (pending.query.query_id !== this.displayedQueryId) {
      this.displayedQueryId = pending.query.query_id;
      this.view.showQuery(pending.query, pending.history);
    }
  }

  /** Submit the answer for the displayed query. Returns true when the
   * answer was recorded; repeated calls while one submission is in
   * flight are dropped. */
  async submit(choice: AnswerChoice): Promise<boolean> {
    if (this.submitting || this.currentQuery === null) {
      return false;
    }
    this.submitting = true;
    const queryId = this.currentQuery.query_id;
    try {
      const outcome = await this.client.submitAnswer(this.sessionId, queryId, choice);
      if (outcome === "accepted") {
        this.currentQuery = null;
        return true;
      }
      if (outcome === "conflict") {
        this.view.showNotice("that question was already answered; refreshing");
        this.currentQuery = null;
        this.displayedQueryId = null;
        return false;
      }
      this.view.showNotice("the service rejected the answer");
      return false;
    } finally {
      this.submitting = false;
      if (!this.stopped) {
        void this.tick();
      }
    }
  }
}
