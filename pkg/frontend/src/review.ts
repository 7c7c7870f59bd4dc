/**
 * Review flow for Flagged records: optimistic verdict updates that roll
 * back on a 409 conflict (another reviewer got there first, or the
 * record already left the Flagged state).
 */

import { ApiClient, RecordRow } from "./api.js";

export type ReviewOutcome = "applied" | "conflict" | "error";

export interface VerdictListener {
  (recordId: number, verdict: string | null): void; // null = removed from store
}

export class ReviewFlow {
  private inFlight = new Set<number>();

  constructor(
    private readonly api: ApiClient,
    private readonly onVerdict: VerdictListener,
  ) {}

  /**
   * Submit a decision. The listener fires immediately with the
   * optimistic verdict and again with the rollback value when the
   * server rejects the transition. Double submissions are absorbed.
   */
  async submit(
    record: Pick<RecordRow, "record_id" | "verdict">,
    action: "approve" | "reject",
    note = "",
  ): Promise<ReviewOutcome> {
    const id = record.record_id;
    if (this.inFlight.has(id)) {
      return "conflict"; // double-click: one transition only
    }
    if (record.verdict !== "Flagged") {
      return "conflict";
    }
    this.inFlight.add(id);
    const optimistic = action === "approve" ? "Valid" : null;
    this.onVerdict(id, optimistic);
    try {
      const { status } = await this.api.review(id, action, note);
      if (status === 200) {
        return "applied";
      }
      this.onVerdict(id, "Flagged"); // roll back
      return status === 409 ? "conflict" : "error";
    } catch {
      this.onVerdict(id, "Flagged");
      return "error";
    } finally {
      this.inFlight.delete(id);
    }
  }
}
