import { describe, expect, it } from "vitest";

import { ApiError, Client } from "../src/api.js";
import { FakeServer } from "./fakeServer.js";

const HEALTH = "Name,City,BT\nZidane,Madrid,O\nAva,Doha,NULL\nLia,Paris,A\nNoor,Tunis,NULL\n";

function makeClient(server: FakeServer): Client {
  return new Client({ fetchImpl: server.fetch });
}

function csvFile(text: string, name: string): { blob: Blob; name: string } {
  return { blob: new File([text], name, { type: "text/csv" }), name };
}

describe("uploads", () => {
  it("posts the table as multipart and returns its shape", async () => {
    const server = new FakeServer();
    const client = makeClient(server);
    const info = await client.uploadTable(new File([HEALTH], "health.csv"), "health.csv");
    expect(info.name).toBe("health.csv");
    expect(info.columns).toEqual(["Name", "City", "BT"]);
    expect(info.rows).toBe(4);
    expect(server.requests).toContainEqual({ method: "POST", path: "/v1/tables" });
  });

  it("uploads several lake files in one request", async () => {
    const server = new FakeServer();
    const client = makeClient(server);
    const lake = await client.uploadLake([
      csvFile("A,B\n1,2\n", "one.csv"),
      csvFile("C,D\n3,4\n", "two.csv"),
    ]);
    expect(lake.tables.map((t) => t.name)).toEqual(["one.csv", "two.csv"]);
    expect(server.requests.filter((r) => r.path === "/v1/lakes")).toHaveLength(1);
  });
});

describe("errors", () => {
  it("wraps non-2xx responses in ApiError with the detail body", async () => {
    const server = new FakeServer();
    const client = makeClient(server);
    await expect(client.jobStatus("nope")).rejects.toMatchObject({
      name: "ApiError",
      status: 404,
      detail: "unknown job",
    });
  });

  it("is an Error subclass", () => {
    expect(new ApiError(500, "boom")).toBeInstanceOf(Error);
  });
});

describe("job lifecycle", () => {
  async function submitted(server: FakeServer) {
    const client = makeClient(server);
    const table = await client.uploadTable(new File([HEALTH], "health.csv"), "health.csv");
    const { job_id } = await client.submitJob({
      table: table.table_id,
      dirty_column: "BT",
      is_local_model: true,
    });
    return { client, job_id };
  }

  it("polls until done and reports progress along the way", async () => {
    const server = new FakeServer({ runningPolls: 2, suggestions: { 1: { value: "B" } } });
    const { client, job_id } = await submitted(server);
    const seen: string[] = [];
    const done = await client.pollJob(job_id, 0, (s) => seen.push(s.status));
    expect(done.status).toBe("done");
    expect(seen.slice(0, 2)).toEqual(["running", "running"]);
    expect(seen[seen.length - 1]).toBe("done");
  });

  it("returns results only after the job is done", async () => {
    const server = new FakeServer({
      runningPolls: 1,
      suggestions: { 1: { value: "B" }, 3: { value: "O" } },
    });
    const { client, job_id } = await submitted(server);
    const early = await client.jobResults(job_id);
    expect(early.results).toEqual([]);
    await client.pollJob(job_id, 0);
    const results = await client.jobResults(job_id);
    expect(results.results.map((r) => [r.row_id, r.suggested_value])).toEqual([
      [1, "B"],
      [3, "O"],
    ]);
  });

  it("polls an index build until ready", async () => {
    const server = new FakeServer({ buildingPolls: 2 });
    const client = makeClient(server);
    const lake = await client.uploadLake([csvFile("A,B\n1,2\n", "one.csv")]);
    await client.buildIndex(lake.lake_id, "semantic");
    const status = await client.pollIndex(lake.lake_id, "semantic", 0);
    expect(status.index.semantic).toBe("ready");
  });
});

describe("export", () => {
  it("sends the accepted row ids and returns raw bytes", async () => {
    const server = new FakeServer({ suggestions: { 1: { value: "B" }, 3: { value: "O" } } });
    const client = makeClient(server);
    const table = await client.uploadTable(new File([HEALTH], "health.csv"), "health.csv");
    const { job_id } = await client.submitJob({
      table: table.table_id,
      dirty_column: "BT",
      is_local_model: true,
    });
    await client.pollJob(job_id, 0);

    const bytes = await client.exportCsv(job_id, [3]);
    expect(server.lastExportRows).toBe("3");
    const text = new TextDecoder().decode(bytes);
    expect(text).toContain("Noor,Tunis,O");
    expect(text).toContain("Ava,Doha,NULL");
  });

  it("an empty accepted list round-trips the upload byte-for-byte", async () => {
    const server = new FakeServer({ suggestions: { 1: { value: "B" } } });
    const client = makeClient(server);
    const table = await client.uploadTable(new File([HEALTH], "health.csv"), "health.csv");
    const { job_id } = await client.submitJob({
      table: table.table_id,
      dirty_column: "BT",
      is_local_model: true,
    });
    await client.pollJob(job_id, 0);

    const bytes = await client.exportCsv(job_id, []);
    expect(server.lastExportRows).toBe("");
    expect(new TextDecoder().decode(bytes)).toBe(HEALTH);
  });
});
