import { describe, expect, it } from "vitest";

import type { ResultRow } from "../src/api.js";
import { ReviewState } from "../src/review.js";

function row(rowId: number, suggested: string | null): ResultRow {
  return {
    row_id: rowId,
    dirty_column: "BT",
    existing_value: null,
    suggested_value: suggested,
    is_conflict: false,
    lineage: null,
    trail: [],
  };
}

describe("ReviewState", () => {
  it("only rows with a value are reviewable", () => {
    const state = new ReviewState([row(0, null), row(1, "B"), row(3, "O")]);
    expect(state.reviewableRows).toEqual([1, 3]);
    expect(state.pendingCount).toBe(2);
    expect(state.decisionFor(0)).toBeUndefined();
  });

  it("accept and reject move rows out of pending", () => {
    const state = new ReviewState([row(1, "B"), row(3, "O")]);
    state.decide(1, "accepted");
    expect(state.acceptedRows()).toEqual([1]);
    expect(state.pendingCount).toBe(1);
    state.decide(1, "rejected");
    expect(state.acceptedRows()).toEqual([]);
  });

  it("deciding a row with no suggestion throws", () => {
    const state = new ReviewState([row(0, null)]);
    expect(() => state.decide(0, "accepted")).toThrow(/no suggestion/);
  });

  it("decideAll covers every reviewable row", () => {
    const state = new ReviewState([row(1, "B"), row(2, "A"), row(5, "O")]);
    state.decideAll("accepted");
    expect(state.acceptedRows()).toEqual([1, 2, 5]);
    state.decideAll("rejected");
    expect(state.acceptedRows()).toEqual([]);
    expect(state.pendingCount).toBe(0);
  });

  it("accepted rows come back sorted by row id", () => {
    const state = new ReviewState([row(7, "x"), row(2, "y"), row(4, "z")]);
    state.decide(7, "accepted");
    state.decide(2, "accepted");
    expect(state.acceptedRows()).toEqual([2, 7]);
  });
});
