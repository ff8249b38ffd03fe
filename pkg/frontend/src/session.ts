/** Session state machine: fetch the next unjudged item, collect one judgment
 * per pending dimension, submit, advance. Errors surface inline without losing
 * the session position; duplicates count as already saved. */

import { ApiError, DuplicateJudgmentError, ReviewApiClient } from "./api.js";
import type { Dimension, JudgmentValue, Progress, SessionItem } from "./types.js";
import { isDone } from "./types.js";

export interface SessionView {
  item: SessionItem | null;
  dimension: Dimension | null;
  progress: Progress;
  done: boolean;
  error: string | null;
}

export type ViewSink = (view: SessionView) => void;

export class SessionController {
  private item: SessionItem | null = null;
  private pending: Dimension[] = [];
  private progress: Progress = { judged: 0, total: 0 };
  private done = false;
  private error: string | null = null;
  private busy = false;

  constructor(
    private readonly api: ReviewApiClient,
    private readonly evaluator: string,
    private readonly sink: ViewSink,
  ) {}

  view(): SessionView {
    return {
      item: this.item,
      dimension: this.pending[0] ?? null,
      progress: this.progress,
      done: this.done,
      error: this.error,
    };
  }

  private emit(): void {
    this.sink(this.view());
  }

  /** Fetch the first (or next) unjudged item; also how a reload resumes. */
  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    const resp = await this.api.nextItem(this.evaluator);
    if (isDone(resp)) {
      this.item = null;
      this.pending = [];
      this.progress = resp.progress;
      this.done = true;
    } else {
      this.item = resp;
      this.pending = [...resp.dimensions];
      this.progress = resp.progress;
      this.done = false;
    }
    this.emit();
  }

  /** Submit the choice for the dimension currently being judged. */
  async choose(value: JudgmentValue): Promise<void> {
    const item = this.item;
    const dimension = this.pending[0];
    if (!item || !dimension || this.busy) {
      return;
    }
    this.busy = true;
    try {
      const progress = await this.api.submitJudgment(
        this.evaluator,
        item.item_id,
        dimension,
        value,
      );
      this.progress = progress;
      this.error = null;
      this.pending.shift();
    } catch (err) {
      if (err instanceof DuplicateJudgmentError) {
        // saved previously (double-click or an earlier session): move on
        this.error = null;
        this.pending.shift();
      } else if (err instanceof ApiError) {
        this.error = `submission rejected (${err.status}): ${err.message}`;
        this.emit();
        return;
      } else {
        this.error = `network failure: ${(err as Error).message}`;
        this.emit();
        return;
      }
    } finally {
      this.busy = false;
    }
    if (this.pending.length === 0) {
      await this.advance();
    } else {
      this.emit();
    }
  }
}
