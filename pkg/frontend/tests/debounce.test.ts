import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { rateLimit } from "../src/debounce.js";

describe("rateLimit", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("fires immediately when idle", () => {
    const fn = vi.fn();
    const limited = rateLimit(fn, 150);
    limited();
    expect(fn).toHaveBeenCalledTimes(1);
  });

  it("coalesces a burst into leading plus one trailing call", () => {
    const fn = vi.fn();
    const limited = rateLimit(fn, 150);
    limited(1);
    limited(2);
    limited(3);
    expect(fn).toHaveBeenCalledTimes(1);
    expect(fn).toHaveBeenLastCalledWith(1);
    vi.advanceTimersByTime(150);
    expect(fn).toHaveBeenCalledTimes(2);
    expect(fn).toHaveBeenLastCalledWith(3);
  });

  it("continuous calls for 1s at 150ms cap at 7 invocations", () => {
    const fn = vi.fn();
    const limited = rateLimit(fn, 150);
    // simulate mousemove every 16 ms for one second
    for (let t = 0; t < 1000; t += 16) {
      limited(t);
      vi.advanceTimersByTime(16);
    }
    expect(fn.mock.calls.length).toBeLessThanOrEqual(7);
    expect(fn.mock.calls.length).toBe(7);
  });

  it("spaces calls by at least the interval", () => {
    const stamps: number[] = [];
    const limited = rateLimit(() => stamps.push(Date.now()), 150);
    for (let t = 0; t < 2000; t += 10) {
      limited();
      vi.advanceTimersByTime(10);
    }
    for (let i = 1; i < stamps.length; i++) {
      expect((stamps[i] as number) - (stamps[i - 1] as number)).toBeGreaterThanOrEqual(150);
    }
  });

  it("goes back to immediate firing after a quiet period", () => {
    const fn = vi.fn();
    const limited = rateLimit(fn, 150);
    limited();
    vi.advanceTimersByTime(1000);
    limited();
    expect(fn).toHaveBeenCalledTimes(2);
  });

  it("cancel drops the pending trailing call", () => {
    const fn = vi.fn();
    const limited = rateLimit(fn, 150);
    limited(1);
    limited(2);
    limited.cancel();
    vi.advanceTimersByTime(1000);
    expect(fn).toHaveBeenCalledTimes(1);
  });

  it("flush runs the pending trailing call now", () => {
    const fn = vi.fn();
    const limited = rateLimit(fn, 150);
    limited(1);
    limited(2);
    limited.flush();
    expect(fn).toHaveBeenCalledTimes(2);
    expect(fn).toHaveBeenLastCalledWith(2);
  });
});
