/**
 * Accept/reject bookkeeping for the review stage. Pure state, no DOM.
 *
 * Only rows that actually carry a suggested value are reviewable; a row the
 * engine left untouched has nothing to accept.
 */

import type { ResultRow } from "./api.js";

export type Decision = "pending" | "accepted" | "rejected";

export class ReviewState {
  private decisions = new Map<number, Decision>();
  readonly byRow = new Map<number, ResultRow>();

  constructor(results: ResultRow[]) {
    for (const row of results) {
      this.byRow.set(row.row_id, row);
      if (row.suggested_value !== null) {
        this.decisions.set(row.row_id, "pending");
      }
    }
  }

  get reviewableRows(): number[] {
    return [...this.decisions.keys()].sort((a, b) => a - b);
  }

  decisionFor(rowId: number): Decision | undefined {
    return this.decisions.get(rowId);
  }

  decide(rowId: number, decision: Decision): void {
    if (!this.decisions.has(rowId)) {
      throw new Error(`row ${rowId} has no suggestion to review`);
    }
    this.decisions.set(rowId, decision);
  }

  decideAll(decision: Decision): void {
    for (const rowId of this.decisions.keys()) {
      this.decisions.set(rowId, decision);
    }
  }

  /** Row ids to send to the export endpoint: accepted ones only. */
  acceptedRows(): number[] {
    return this.reviewableRows.filter((id) => this.decisions.get(id) === "accepted");
  }

  get pendingCount(): number {
    let count = 0;
    for (const d of this.decisions.values()) {
      if (d === "pending") {
        count += 1;
      }
    }
    return count;
  }
}
