/**
 * One in-flight request per panel: responses arriving out of order are
 * discarded by sequence number.
 */

export class RequestSequencer {
  private counter = 0;

  /** Claim the next sequence id (call right before issuing a request). */
  next(): number {
    this.counter += 1;
    return this.counter;
  }

  /** True iff the id belongs to the most recently issued request. */
  isCurrent(id: number): boolean {
    return id === this.counter;
  }
}
