/** Grid revision counter tying responses to the edits that caused them.
 *
 * Every mutation bumps the revision; a response carries the revision it
 * was requested for and is dropped unless it still matches. The stale
 * flag stays up until a response for the current revision lands.
 */

export class RevisionTracker {
  private current = 0;

  bump(): number {
    return ++this.current;
  }

  get revision(): number {
    return this.current;
  }

  isCurrent(rev: number): boolean {
    return rev === this.current;
  }
}
