/**
 * One poller per job, one request in flight at a time.
 *
 * A tick that fires while the previous request is still pending is
 * skipped, so a slow service sees at most one outstanding poll per job.
 * Polling stops on done, failed, or a 404 (job unknown to the service).
 */

import { ApiError } from "./api.js";

export interface PollCallbacks<T extends { state: string; error: string | null }> {
  onUpdate: (body: T) => void;
  onDone: (body: T) => void;
  onFailed?: (body: T) => void;
  /** Job vanished (404); the poller has already stopped. */
  onGone?: (error: ApiError) => void;
}

export const POLL_INTERVAL_MS = 1000;

export class JobPoller<T extends { state: string; error: string | null }> {
  private timer: ReturnType<typeof setInterval> | null = null;
  private pending = false;
  private stopped = false;

  constructor(
    readonly jobId: string,
    private readonly fetchJob: (jobId: string) => Promise<T>,
    private readonly callbacks: PollCallbacks<T>,
    private readonly intervalMs: number = POLL_INTERVAL_MS,
  ) {}

  get active(): boolean {
    return this.timer !== null || this.pending;
  }

  start(): void {
    if (this.timer !== null || this.stopped) return;
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private async tick(): Promise<void> {
    if (this.pending || this.stopped) return;
    this.pending = true;
    try {
      const body = await this.fetchJob(this.jobId);
      if (this.stopped) return;
      if (body.state === "done") {
        this.stop();
        this.callbacks.onDone(body);
      } else if (body.state === "failed") {
        this.stop();
        this.callbacks.onFailed?.(body);
      } else {
        this.callbacks.onUpdate(body);
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.stop();
        this.callbacks.onGone?.(err);
      }
      // other errors (transient network, 5xx) leave the poller running
    } finally {
      this.pending = false;
    }
  }
}

interface TrackedPoller {
  readonly jobId: string;
  readonly active: boolean;
}

/** Hands out pollers keyed by job id so a job is never polled twice. */
export class PollRegistry {
  private readonly pollers = new Map<string, TrackedPoller>();

  get inFlight(): readonly string[] {
    return [...this.pollers.keys()].filter((id) => this.pollers.get(id)?.active);
  }

  track<P extends TrackedPoller>(poller: P): P {
    const existing = this.pollers.get(poller.jobId);
    if (existing?.active) {
      throw new Error(`job ${poller.jobId} is already being polled`);
    }
    this.pollers.set(poller.jobId, poller);
    return poller;
  }
}
