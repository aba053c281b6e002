// Request coalescing for slider interaction.
//
// At most one request is in flight. While it runs, newer queries overwrite
// each other and only the newest is sent next, so a fast drag costs a
// handful of requests instead of hundreds. Responses come back in launch
// order (single flight), which makes the last delivered result match the
// last submitted state once the user stops moving. Re-submitting a state
// identical to the one already rendered is a no-op.

export class LatestWins<Q, R> {
  private inFlight = false;
  private pending: Q | null = null;
  private lastDelivered: Q | null = null;

  constructor(
    private readonly send: (query: Q) => Promise<R>,
    private readonly deliver: (query: Q, result: R) => void,
    private readonly onError: (query: Q, err: unknown) => void = () => {},
    private readonly sameQuery: (a: Q, b: Q) => boolean = (a, b) => a === b,
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  submit(query: Q): void {
    if (this.inFlight) {
      this.pending = query;
      return;
    }
    if (this.lastDelivered !== null && this.sameQuery(query, this.lastDelivered)) {
      return;
    }
    void this.launch(query);
  }

  private async launch(query: Q): Promise<void> {
    this.inFlight = true;
    try {
      const result = await this.send(query);
      this.lastDelivered = query;
      this.deliver(query, result);
    } catch (err) {
      // a failure only matters if nothing newer is queued behind it
      if (this.pending === null) this.onError(query, err);
    } finally {
      this.inFlight = false;
      const next = this.pending;
      this.pending = null;
      if (
        next !== null &&
        !(this.lastDelivered !== null && this.sameQuery(next, this.lastDelivered))
      ) {
        void this.launch(next);
      }
    }
  }
}
