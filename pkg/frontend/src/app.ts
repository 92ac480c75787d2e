/**
 * Wires the upload -> configure -> run -> review flow onto a root element.
 *
 * All server interaction goes through the injected Client; the only other
 * seam is deliverFile, because jsdom has no object URLs and a test needs to
 * see the exported bytes.
 */

import { ApiError, Client, type JobRequest, type JobStatus, type ResultRow, type TableInfo, type LakeInfo } from "./api.js";
import { parseForDisplay, type ParsedCsv } from "./csv.js";
import { ReviewState } from "./review.js";

export interface AppHooks {
  deliverFile?: (name: string, bytes: Uint8Array) => void;
  pollIntervalMs?: number;
}

interface AppState {
  table: TableInfo | null;
  tableText: string;
  grid: ParsedCsv | null;
  lake: LakeInfo | null;
  indexReady: boolean;
  jobId: string | null;
  review: ReviewState | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function defaultDeliver(name: string, bytes: Uint8Array): void {
  const url = URL.createObjectURL(new Blob([bytes], { type: "text/csv" }));
  const anchor = el("a", { href: url, download: name });
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}

export function initApp(root: HTMLElement, client: Client, hooks: AppHooks = {}): void {
  const deliver = hooks.deliverFile ?? defaultDeliver;
  const pollMs = hooks.pollIntervalMs ?? 500;
  const state: AppState = {
    table: null,
    tableText: "",
    grid: null,
    lake: null,
    indexReady: false,
    jobId: null,
    review: null,
  };

  root.innerHTML = "";
  const status = el("p", { id: "status", class: "status" });
  root.appendChild(status);

  const stages = {
    upload: el("section", { id: "stage-upload", class: "stage" }),
    configure: el("section", { id: "stage-configure", class: "stage hidden" }),
    run: el("section", { id: "stage-run", class: "stage hidden" }),
    review: el("section", { id: "stage-review", class: "stage hidden" }),
  };
  for (const stage of Object.values(stages)) {
    root.appendChild(stage);
  }

  function show(name: keyof typeof stages): void {
    for (const [key, stage] of Object.entries(stages)) {
      stage.classList.toggle("hidden", key !== name);
    }
  }

  function report(message: string, isError = false): void {
    status.textContent = message;
    status.classList.toggle("error", isError);
  }

  async function guarded(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      if (err instanceof ApiError) {
        report(`${err.status}: ${JSON.stringify(err.detail)}`, true);
      } else {
        report(String(err), true);
      }
    }
  }

  // -- upload stage ---------------------------------------------------------

  stages.upload.appendChild(el("h2", {}, "1. Upload"));
  const tableInput = el("input", { type: "file", id: "table-file", accept: ".csv" });
  const lakeInput = el("input", { type: "file", id: "lake-files", accept: ".csv", multiple: "" });
  const uploadBtn = el("button", { id: "upload-btn" }, "Upload");
  stages.upload.append(
    labelled("Table to clean", tableInput),
    labelled("Data lake CSVs (optional)", lakeInput),
    uploadBtn,
  );

  uploadBtn.addEventListener("click", () => {
    void guarded(async () => {
      const tableFile = tableInput.files?.[0];
      if (!tableFile) {
        report("choose a table file first", true);
        return;
      }
      state.tableText = await tableFile.text();
      state.grid = parseForDisplay(state.tableText);
      state.table = await client.uploadTable(tableFile, tableFile.name);
      const lakeFiles = [...(lakeInput.files ?? [])];
      if (lakeFiles.length > 0) {
        state.lake = await client.uploadLake(
          lakeFiles.map((f) => ({ blob: f, name: f.name })),
        );
      }
      report(
        `uploaded ${state.table.name} (${state.table.rows} rows)` +
          (state.lake ? `, lake of ${state.lake.tables.length} tables` : ""),
      );
      renderConfigure();
      show("configure");
    });
  });

  // -- configure stage ------------------------------------------------------

  function renderConfigure(): void {
    const table = state.table;
    if (!table) {
      return;
    }
    stages.configure.innerHTML = "";
    stages.configure.appendChild(el("h2", {}, "2. Configure"));

    const dirtySelect = el("select", { id: "dirty-column" });
    for (const column of table.columns) {
      dirtySelect.appendChild(el("option", { value: column }, column));
    }
    const markerInput = el("input", { id: "marker", value: "NULL" });
    const localToggle = el("input", { type: "checkbox", id: "local-model" });
    localToggle.checked = true;
    const indexerSelect = el("select", { id: "indexer" });
    indexerSelect.append(
      el("option", { value: "syntactic" }, "syntactic"),
      el("option", { value: "semantic" }, "semantic"),
    );
    const rerankerSelect = el("select", { id: "reranker" });
    rerankerSelect.append(
      el("option", { value: "maxsim" }, "maxsim"),
      el("option", { value: "cross" }, "cross"),
    );
    const nInput = el("input", { id: "depth-n", type: "number", value: "100" });
    const kInput = el("input", { id: "depth-k", type: "number", value: "5" });
    const repairToggle = el("input", { type: "checkbox", id: "repair" });

    stages.configure.append(
      labelled("Column to clean", dirtySelect),
      labelled("Missing-value marker", markerInput),
    );
    if (state.lake) {
      // without a lake the job prompts the remote model directly, so the
      // local reasoner is not an option
      stages.configure.appendChild(labelled("Local reasoner (no remote model)", localToggle));
    }

    const buildBtn = el("button", { id: "build-index-btn" }, "Build index");
    const indexBadge = el("span", { id: "index-state", class: "badge" }, "no index");
    if (state.lake) {
      stages.configure.append(
        labelled("Index", indexerSelect),
        labelled("Reranker", rerankerSelect),
        labelled("Retrieve top n", nInput),
        labelled("Rerank top k", kInput),
        labelled("Repair mode (validate existing values)", repairToggle),
      );
      const row = el("div", { class: "index-row" });
      row.append(buildBtn, indexBadge);
      stages.configure.appendChild(row);
    }

    const runBtn = el("button", { id: "run-btn" }, "Run cleaning");
    stages.configure.appendChild(runBtn);

    buildBtn.addEventListener("click", () => {
      void guarded(async () => {
        if (!state.lake) {
          return;
        }
        const mode = indexerSelect.value as "syntactic" | "semantic";
        indexBadge.textContent = "building";
        await client.buildIndex(state.lake.lake_id, mode);
        await client.pollIndex(state.lake.lake_id, mode, pollMs);
        state.indexReady = true;
        indexBadge.textContent = "ready";
        report(`${mode} index ready`);
      });
    });

    runBtn.addEventListener("click", () => {
      void guarded(async () => {
        if (state.lake && !state.indexReady) {
          report("build the index first", true);
          return;
        }
        const request: JobRequest = {
          table: table.table_id,
          dirty_column: dirtySelect.value,
          relevant_columns: "ALL",
          value: markerInput.value,
          datalake: state.lake?.lake_id ?? null,
          is_local_model: state.lake ? localToggle.checked : false,
          indexer: indexerSelect.value as "syntactic" | "semantic",
          reranker: rerankerSelect.value as "maxsim" | "cross",
          n: Number(nInput.value),
          k: Number(kInput.value),
          repair: repairToggle.checked,
        };
        const { job_id } = await client.submitJob(request);
        state.jobId = job_id;
        show("run");
        renderRun();
        const done = await client.pollJob(job_id, pollMs, updateProgress);
        updateProgress(done);
        const results = await client.jobResults(job_id);
        state.review = new ReviewState(results.results);
        renderReview(results.results, dirtySelect.value);
        show("review");
        report(`job done, ${results.results.length} rows processed`);
      });
    });
  }

  // -- run stage --------------------------------------------------------------

  const progressText = el("p", { id: "progress" });

  function renderRun(): void {
    stages.run.innerHTML = "";
    stages.run.append(el("h2", {}, "3. Run"), progressText);
    progressText.textContent = "submitted";
  }

  function updateProgress(job: JobStatus): void {
    progressText.textContent =
      `${job.status}: ${job.progress.processed}/${job.progress.total}`;
  }

  // -- review stage -------------------------------------------------------------

  function renderReview(results: ResultRow[], dirtyColumn: string): void {
    const grid = state.grid;
    const review = state.review;
    if (!grid || !review) {
      return;
    }
    stages.review.innerHTML = "";
    stages.review.appendChild(el("h2", {}, "4. Review"));

    const pendingNote = el("p", { id: "pending-note" });
    const table = el("table", { id: "review-grid" });
    const head = el("tr");
    for (const column of grid.columns) {
      head.appendChild(el("th", {}, column));
    }
    head.appendChild(el("th", { class: "suggestion" }, "Suggestion"));
    head.appendChild(el("th", {}, "Decision"));
    table.appendChild(head);

    const dirtyIndex = grid.columns.indexOf(dirtyColumn);
    for (const [rowId, cells] of grid.rows.entries()) {
      const tr = el("tr", { "data-row": String(rowId) });
      for (const [i, cell] of cells.entries()) {
        const td = el("td", {}, cell);
        if (i === dirtyIndex) {
          td.classList.add("dirty-column");
        }
        tr.appendChild(td);
      }
      const result = review.byRow.get(rowId);
      tr.appendChild(renderSuggestionCell(rowId, result));
      tr.appendChild(renderDecisionCell(rowId, result));
      table.appendChild(tr);
    }

    const rejectAll = el("button", { id: "reject-all" }, "Reject all");
    const acceptAll = el("button", { id: "accept-all" }, "Accept all");
    const exportBtn = el("button", { id: "export-btn" }, "Export CSV");
    const popover = el("div", { id: "source-popover", class: "popover hidden" });
    stages.review.append(pendingNote, table, acceptAll, rejectAll, exportBtn, popover);

    function refreshDecisions(): void {
      if (!review) {
        return;
      }
      pendingNote.textContent = `${review.pendingCount} suggestions awaiting review`;
      for (const tr of table.querySelectorAll("tr[data-row]")) {
        const rowId = Number((tr as HTMLElement).dataset.row);
        const decision = review.decisionFor(rowId);
        tr.classList.toggle("accepted", decision === "accepted");
        tr.classList.toggle("rejected", decision === "rejected");
      }
    }

    function renderSuggestionCell(rowId: number, result?: ResultRow): HTMLTableCellElement {
      const td = el("td", { class: "suggestion" });
      if (!result || result.suggested_value === null) {
        td.textContent = "";
        return td;
      }
      td.appendChild(el("span", { class: "suggested-value" }, result.suggested_value));
      if (result.is_conflict) {
        td.appendChild(el("span", { class: "badge conflict" }, "conflict"));
      }
      if (result.lineage) {
        const info = el("button", { class: "source-btn", title: "show source tuple" }, "ⓘ");
        info.addEventListener("click", () => {
          void guarded(() => showSource(rowId));
        });
        td.appendChild(info);
      }
      return td;
    }

    function renderDecisionCell(rowId: number, result?: ResultRow): HTMLTableCellElement {
      const td = el("td");
      if (!result || result.suggested_value === null) {
        return td;
      }
      const accept = el("button", { class: "accept-btn" }, "accept");
      const reject = el("button", { class: "reject-btn" }, "reject");
      accept.addEventListener("click", () => {
        review?.decide(rowId, "accepted");
        refreshDecisions();
      });
      reject.addEventListener("click", () => {
        review?.decide(rowId, "rejected");
        refreshDecisions();
      });
      td.append(accept, reject);
      return td;
    }

    async function showSource(rowId: number): Promise<void> {
      if (!state.jobId) {
        return;
      }
      const source = await client.rowSource(state.jobId, rowId);
      popover.innerHTML = "";
      popover.appendChild(
        el("h3", {}, `${source.table_name}, row ${source.row}`),
      );
      const list = el("dl", { class: "source-attrs" });
      for (const attr of source.attributes) {
        const dt = el("dt", {}, attr.name);
        const dd = el("dd", {}, attr.value ?? "");
        if (attr.name === source.attribute) {
          dt.classList.add("lineage-cell");
          dd.classList.add("lineage-cell");
        }
        list.append(dt, dd);
      }
      popover.appendChild(list);
      const close = el("button", { class: "close-popover" }, "close");
      close.addEventListener("click", () => popover.classList.add("hidden"));
      popover.appendChild(close);
      popover.classList.remove("hidden");
    }

    acceptAll.addEventListener("click", () => {
      review?.decideAll("accepted");
      refreshDecisions();
    });
    rejectAll.addEventListener("click", () => {
      review?.decideAll("rejected");
      refreshDecisions();
    });
    exportBtn.addEventListener("click", () => {
      void guarded(async () => {
        if (!state.jobId || !review || !state.table) {
          return;
        }
        const repair = (document.getElementById("repair") as HTMLInputElement | null)?.checked;
        const bytes = await client.exportCsv(state.jobId, review.acceptedRows(), repair ?? false);
        const stem = state.table.name.replace(/\.csv$/i, "");
        deliver(`${stem}-cleaned.csv`, bytes);
        report(`exported ${bytes.length} bytes`);
      });
    });

    refreshDecisions();
  }

  show("upload");
  report("upload a table to begin");
}

function labelled(text: string, control: HTMLElement): HTMLLabelElement {
  const label = el("label", { class: "field" });
  label.appendChild(el("span", {}, text));
  label.appendChild(control);
  return label;
}
