/**
 * Debounced, last-write-wins request scheduling for live steering.
 *
 * While the user drags the weight slider the UI may produce hundreds of
 * parameter changes per second. The scheduler rate-limits outgoing
 * requests (leading edge fires immediately, trailing edge catches the
 * final value) and tags each request with a monotonically increasing
 * sequence number so a stale response can never overwrite a newer one.
 */

export interface Clock {
  now(): number;
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

export const realClock: Clock = {
  now: () => Date.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (h) => clearTimeout(h as ReturnType<typeof setTimeout>),
};

export class RequestScheduler<P, R> {
  private seq = 0;
  private applied = 0;
  private lastFire = -Infinity;
  private pending: P | null = null;
  private timer: unknown = null;

  /**
   * @param send issues the request for a parameter set
   * @param apply renders a response; called only for the newest response
   * @param minIntervalMs floor between outgoing requests (default 100 ms,
   *        i.e. at most 10 requests/s while dragging)
   */
  constructor(
    private readonly send: (params: P) => Promise<R>,
    private readonly apply: (result: R, params: P) => void,
    private readonly onError: (err: unknown) => void = () => {},
    private readonly minIntervalMs = 100,
    private readonly clock: Clock = realClock,
  ) {}

  /** Request a render for `params`; intermediate values may be skipped. */
  schedule(params: P): void {
    const now = this.clock.now();
    const wait = this.lastFire + this.minIntervalMs - now;
    if (wait <= 0) {
      this.fire(params);
      return;
    }
    this.pending = params;
    if (this.timer === null) {
      this.timer = this.clock.setTimeout(() => {
        this.timer = null;
        if (this.pending !== null) {
          const p = this.pending;
          this.pending = null;
          this.fire(p);
        }
      }, wait);
    }
  }

  /** Bypass the rate limit (e.g. on pointer-up after a drag). */
  flush(params: P): void {
    if (this.timer !== null) {
      this.clock.clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
    this.fire(params);
  }

  private fire(params: P): void {
    this.lastFire = this.clock.now();
    const ticket = ++this.seq;
    this.send(params).then(
      (result) => {
        if (ticket > this.applied) {
          this.applied = ticket;
          this.apply(result, params);
        }
      },
      (err) => {
        if (ticket > this.applied) {
          this.applied = ticket;
          this.onError(err);
        }
      },
    );
  }
}
