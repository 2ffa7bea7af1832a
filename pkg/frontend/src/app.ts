// DOM wiring: three screens (runs, run detail, review queue) over the
// service client. Polling cadence: 2 s for the queue, 10 s for runs.

import {
  ApiError,
  NetworkError,
  PendingItem,
  RunSummary,
  ServiceClient,
} from "./api.js";
import {
  DEFAULT_LAYOUT,
  equityPath,
  markerDots,
  spanRects,
} from "./chart.js";
import {
  MISSING_REPORT_PLACEHOLDER,
  applyRunsPoll,
  deriveMarkers,
  emptyStateMessage,
  initialRunsState,
  longSpans,
  metricChips,
  parseEquityCsv,
  parseSignalsCsv,
  queueView,
  validateOverride,
} from "./model.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8713";
const client = new ServiceClient(SERVICE_URL);

const app = document.getElementById("app")!;
let runsState = initialRunsState();
let currentRun: string | null = null;

function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function toast(message: string) {
  const t = el("div", { class: "toast" }, message);
  document.body.appendChild(t);
  setTimeout(() => t.remove(), 3000);
}

// -- runs screen -----------------------------------------------------------

async function pollRuns() {
  try {
    const runs = await client.listRuns();
    runsState = applyRunsPoll(runsState, { runs });
  } catch (err) {
    const msg =
      err instanceof NetworkError
        ? `Service unreachable at ${SERVICE_URL} - retrying`
        : `Service error: ${(err as Error).message}`;
    runsState = applyRunsPoll(runsState, { error: msg });
  }
  if (currentRun === null) renderRuns();
}

function renderRuns() {
  app.replaceChildren();
  app.appendChild(el("h1", {}, "Runs"));
  if (runsState.banner) {
    app.appendChild(el("div", { class: "banner" }, runsState.banner));
  }
  const empty = emptyStateMessage(runsState);
  if (empty) {
    app.appendChild(el("p", { class: "empty" }, empty));
  }
  const list = el("div", { class: "run-list" });
  for (const run of runsState.runs) {
    const row = el("div", { class: "run-row" });
    const link = el("a", { href: "#" }, run.run_id);
    link.addEventListener("click", (e) => {
      e.preventDefault();
      void openRun(run.run_id);
    });
    row.appendChild(link);
    for (const chip of metricChips(run.metrics)) {
      row.appendChild(el("span", { class: "chip" }, chip));
    }
    list.appendChild(row);
  }
  app.appendChild(list);
  app.appendChild(queueSection());
}

// -- run detail --------------------------------------------------------------

async function openRun(runId: string) {
  currentRun = runId;
  app.replaceChildren(el("p", {}, `Loading ${runId}...`));
  try {
    const [detail, equityCsv, signalsCsv] = await Promise.all([
      client.getRun(runId),
      client.getEquityCsv(runId),
      client.getSignalsCsv(runId),
    ]);
    const equity = parseEquityCsv(equityCsv);
    const signals = parseSignalsCsv(signalsCsv);
    renderRunDetail(runId, detail.report_dates, equity, signals);
  } catch (err) {
    app.replaceChildren(
      el("div", { class: "banner" }, `Failed to load ${runId}: ${(err as Error).message}`),
    );
    const back = el("a", { href: "#" }, "Back to runs");
    back.addEventListener("click", (e) => {
      e.preventDefault();
      currentRun = null;
      renderRuns();
    });
    app.appendChild(back);
  }
}

function renderRunDetail(
  runId: string,
  reportDates: string[],
  equity: ReturnType<typeof parseEquityCsv>,
  signals: ReturnType<typeof parseSignalsCsv>,
) {
  app.replaceChildren();
  const back = el("a", { href: "#" }, "< runs");
  back.addEventListener("click", (e) => {
    e.preventDefault();
    currentRun = null;
    renderRuns();
  });
  app.appendChild(back);
  app.appendChild(el("h1", {}, runId));

  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("width", String(DEFAULT_LAYOUT.width));
  svg.setAttribute("height", String(DEFAULT_LAYOUT.height));
  svg.setAttribute("class", "equity-chart");

  for (const rect of spanRects(longSpans(signals), equity)) {
    const r = document.createElementNS(svgNs, "rect");
    r.setAttribute("x", String(rect.x));
    r.setAttribute("y", "0");
    r.setAttribute("width", String(rect.width));
    r.setAttribute("height", String(DEFAULT_LAYOUT.height));
    r.setAttribute("fill", "#1f77b410");
    svg.appendChild(r);
  }
  const path = document.createElementNS(svgNs, "path");
  path.setAttribute("d", equityPath(equity));
  path.setAttribute("fill", "none");
  path.setAttribute("stroke", "#333");
  svg.appendChild(path);
  for (const dot of markerDots(deriveMarkers(signals, equity), equity)) {
    const c = document.createElementNS(svgNs, "circle");
    c.setAttribute("cx", dot.cx.toFixed(2));
    c.setAttribute("cy", dot.cy.toFixed(2));
    c.setAttribute("r", "5");
    c.setAttribute("fill", dot.color);
    c.setAttribute("class", "trade-marker");
    const title = document.createElementNS(svgNs, "title");
    title.textContent = dot.label;
    c.appendChild(title);
    svg.appendChild(c);
  }
  app.appendChild(svg);

  const viewer = el("pre", { class: "report" }, "Select a date to view its report.");
  const dates = el("div", { class: "report-dates" });
  for (const date of reportDates) {
    const btn = el("button", {}, date);
    btn.addEventListener("click", async () => {
      try {
        viewer.textContent = await client.getReport(runId, date);
      } catch (err) {
        viewer.textContent =
          err instanceof ApiError && err.status === 404
            ? MISSING_REPORT_PLACEHOLDER
            : `Failed to load report: ${(err as Error).message}`;
      }
    });
    dates.appendChild(btn);
  }
  app.appendChild(dates);
  app.appendChild(viewer);
}

// -- review queue ---------------------------------------------------------------

let pendingCache: PendingItem[] = [];

async function pollQueue() {
  try {
    pendingCache = queueView(await client.listPending());
  } catch {
    return; // the runs banner already reports connectivity problems
  }
  if (currentRun === null) renderRuns();
}

function queueSection(): HTMLElement {
  const section = el("div", { class: "queue" });
  section.appendChild(el("h2", {}, "Pending decisions"));
  if (pendingCache.length === 0) {
    section.appendChild(el("p", { class: "empty" }, "Queue is empty."));
    return section;
  }
  for (const item of pendingCache) {
    section.appendChild(pendingRow(item));
  }
  return section;
}

function pendingRow(item: PendingItem): HTMLElement {
  const row = el("div", { class: "pending-row" });
  row.appendChild(
    el("span", {}, `${item.date} ${item.ticker}: proposed ${item.proposed.action}`),
  );

  const approve = el("button", {}, "Approve");
  approve.addEventListener("click", async () => {
    await resolveSafely(item.id, { action: "approve", operator_id: operatorId() });
  });
  row.appendChild(approve);

  const select = el("select") as HTMLSelectElement;
  for (const action of ["", "Buy", "Sell", "Hold"]) {
    const opt = el("option", { value: action }, action || "override to...") as HTMLOptionElement;
    select.appendChild(opt);
  }
  const note = el("input", { placeholder: "note (required)" }) as HTMLInputElement;
  const submit = el("button", { disabled: "true" }, "Override") as HTMLButtonElement;

  const revalidate = () => {
    const verdict = validateOverride(item, { newAction: select.value, note: note.value });
    submit.disabled = !verdict.ok;
    submit.title = verdict.reason ?? "";
  };
  select.addEventListener("change", revalidate);
  note.addEventListener("input", revalidate);
  submit.addEventListener("click", async () => {
    await resolveSafely(item.id, {
      action: "override",
      new_action: select.value,
      note: note.value,
      operator_id: operatorId(),
    });
  });
  row.append(select, note, submit);
  return row;
}

async function resolveSafely(id: string, body: Parameters<typeof client.resolvePending>[1]) {
  try {
    await client.resolvePending(id, body);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      toast("Already resolved elsewhere - refreshing");
    } else {
      toast(`Resolve failed: ${(err as Error).message}`);
    }
  }
  await pollQueue();
}

function operatorId(): string {
  return localStorage.getItem("operator_id") ?? "dashboard";
}

// -- boot --------------------------------------------------------------------

void pollRuns();
void pollQueue();
setInterval(pollRuns, 10_000);
setInterval(pollQueue, 2_000);
