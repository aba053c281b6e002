// Time playback as repeated direct queries: the surrogate answers any t,
// so animation is just a frame grid over the training time range with the
// next batch of frames prefetched while the current one plays.

export interface AnimatorOptions<F> {
  tRange: [number, number];
  fps: number;
  frames?: number; // frame grid size across the range
  window?: number; // frames per prefetch request
  fetchWindow: (ts: number[]) => Promise<F[]>;
  present: (t: number, frame: F) => void;
  setTimer?: (fn: () => void, ms: number) => ReturnType<typeof setTimeout>;
  clearTimer?: (h: ReturnType<typeof setTimeout>) => void;
}

export class TimeAnimator<F> {
  private readonly frames: number;
  private readonly window: number;
  private readonly periodMs: number;
  private readonly setTimer: (fn: () => void, ms: number) => ReturnType<typeof setTimeout>;
  private readonly clearTimer: (h: ReturnType<typeof setTimeout>) => void;

  private idx = 0;
  private buffers = new Map<number, F[]>();
  private fetching = new Set<number>();
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastPresentedT: number | null = null;

  playing = false;

  constructor(private readonly opts: AnimatorOptions<F>) {
    this.frames = opts.frames ?? 50;
    this.window = opts.window ?? 10;
    this.periodMs = 1000 / opts.fps;
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = opts.clearTimer ?? ((h) => clearTimeout(h));
  }

  frameT(i: number): number {
    const [t0, t1] = this.opts.tRange;
    return this.frames === 1 ? t0 : t0 + ((t1 - t0) * i) / (this.frames - 1);
  }

  /** Scrubber position: the last frame actually shown. */
  get currentT(): number {
    return this.lastPresentedT ?? this.frameT(this.idx);
  }

  play(): void {
    if (this.playing) return;
    this.playing = true;
    const w = this.windowOf(this.idx);
    this.ensureWindow(w);
    this.ensureWindow((w + 1) % this.windowCount());
    this.schedule();
  }

  pause(): void {
    this.playing = false;
    if (this.timer !== null) {
      this.clearTimer(this.timer);
      this.timer = null;
    }
  }

  private windowCount(): number {
    return Math.ceil(this.frames / this.window);
  }

  private windowOf(i: number): number {
    return Math.floor(i / this.window);
  }

  private ensureWindow(w: number): void {
    if (this.buffers.has(w) || this.fetching.has(w)) return;
    this.fetching.add(w);
    const first = w * this.window;
    const ts: number[] = [];
    for (let i = first; i < Math.min(first + this.window, this.frames); i++) {
      ts.push(this.frameT(i));
    }
    this.opts
      .fetchWindow(ts)
      .then((frames) => this.buffers.set(w, frames))
      .catch(() => {}) // a missed window shows up as skipped frames, then retries
      .finally(() => this.fetching.delete(w));
  }

  private schedule(): void {
    this.timer = this.setTimer(this.tick, this.periodMs);
  }

  private tick = (): void => {
    if (!this.playing) return;
    const w = this.windowOf(this.idx);
    const buf = this.buffers.get(w);
    if (buf) {
      const t = this.frameT(this.idx);
      this.opts.present(t, buf[this.idx - w * this.window]);
      this.lastPresentedT = t;
      this.idx = (this.idx + 1) % this.frames; // loop at range end
      const nw = this.windowOf(this.idx);
      this.ensureWindow(nw);
      this.ensureWindow((nw + 1) % this.windowCount());
      // keep memory bounded: only the active and upcoming windows stay
      for (const k of this.buffers.keys()) {
        if (k !== nw && k !== (nw + 1) % this.windowCount()) this.buffers.delete(k);
      }
    } else {
      this.ensureWindow(w); // stalled: retry, keep cadence
    }
    this.schedule();
  };
}
