/** Rate limiter for edit-driven requests: at most one call per interval.
 *
 * Leading edge fires immediately when the line is idle, so the first
 * paint stroke predicts without delay; calls arriving inside the window
 * coalesce into one trailing call with the latest arguments. Continuous
 * editing for one second at a 150 ms interval therefore issues at most
 * ceil(1000/150) = 7 calls.
 */

export interface RateLimited<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

export function rateLimit<A extends unknown[]>(fn: (...args: A) => void, intervalMs: number): RateLimited<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let lastFire = -Infinity;
  let pending: A | null = null;

  const now = () => Date.now();

  const fire = (args: A) => {
    lastFire = now();
    fn(...args);
  };

  const trailing = () => {
    timer = null;
    if (pending !== null) {
      const args = pending;
      pending = null;
      fire(args);
    }
  };

  const wrapped = (...args: A) => {
    const wait = lastFire + intervalMs - now();
    if (wait <= 0 && timer === null) {
      fire(args);
      return;
    }
    pending = args;
    if (timer === null) timer = setTimeout(trailing, Math.max(wait, 0));
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  wrapped.flush = () => {
    if (timer !== null) clearTimeout(timer);
    trailing();
  };
  return wrapped;
}
