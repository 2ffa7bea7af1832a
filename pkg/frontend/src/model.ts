// View models: everything the screens display, derived from service
// responses only. Numbers are never recomputed client-side; the chart
// geometry is derived 1:1 from the CSV endpoints.

import type { Metrics, PendingItem, RunSummary } from "./api.js";

export interface EquityPoint {
  date: string;
  value: number;
}

export interface SignalRow {
  date: string;
  action: string; // "Buy" | "Sell"
  price: number;
}

export function parseEquityCsv(text: string): EquityPoint[] {
  const lines = text.trim().split("\n");
  if (lines.length === 0 || lines[0] !== "date,value") {
    throw new Error(`unexpected equity header: ${lines[0] ?? "(empty)"}`);
  }
  return lines.slice(1).filter((l) => l.length > 0).map((line) => {
    const [date, value] = line.split(",");
    return { date, value: Number(value) };
  });
}

export function parseSignalsCsv(text: string): SignalRow[] {
  const lines = text.trim().split("\n");
  if (lines.length === 0 || lines[0] !== "date,action,price") {
    throw new Error(`unexpected signals header: ${lines[0] ?? "(empty)"}`);
  }
  return lines.slice(1).filter((l) => l.length > 0).map((line) => {
    const [date, action, price] = line.split(",");
    return { date, action, price: Number(price) };
  });
}

// Marker colors follow the report convention: buys blue, sells orange.
export const BUY_COLOR = "#1f77b4";
export const SELL_COLOR = "#ff7f0e";

export interface Marker {
  date: string;
  action: string;
  color: string;
  /** index into the equity date spine, -1 when the date is off-spine */
  index: number;
  value: number;
}

/** One marker per signals row, anchored on the equity date spine. */
export function deriveMarkers(signals: SignalRow[], equity: EquityPoint[]): Marker[] {
  const spine = new Map(equity.map((p, i) => [p.date, i]));
  return signals.map((s) => {
    const index = spine.get(s.date) ?? -1;
    return {
      date: s.date,
      action: s.action,
      color: s.action === "Buy" ? BUY_COLOR : SELL_COLOR,
      index,
      value: index >= 0 ? equity[index].value : s.price,
    };
  });
}

/** [buyDate, sellDate|null] spans while the position is long. */
export function longSpans(signals: SignalRow[]): Array<[string, string | null]> {
  const spans: Array<[string, string | null]> = [];
  let open: string | null = null;
  for (const s of signals) {
    if (s.action === "Buy" && open === null) {
      open = s.date;
    } else if (s.action === "Sell" && open !== null) {
      spans.push([open, s.date]);
      open = null;
    }
  }
  if (open !== null) spans.push([open, null]);
  return spans;
}

// -- runs screen ------------------------------------------------------------

export function metricChips(metrics: Metrics): string[] {
  const chips = [`CR ${metrics.cr_pct.toFixed(2)}%`, `MDD ${metrics.mdd_pct.toFixed(2)}%`];
  if (metrics.sharpe !== null && metrics.sharpe !== undefined) {
    chips.push(`SR ${metrics.sharpe.toFixed(2)}`);
  }
  return chips;
}

export interface RunsScreenState {
  runs: RunSummary[];
  banner: string | null;
  loaded: boolean;
}

export function initialRunsState(): RunsScreenState {
  return { runs: [], banner: null, loaded: false };
}

/** Success replaces the list; failure raises a banner but keeps the list. */
export function applyRunsPoll(
  state: RunsScreenState,
  result: { runs?: RunSummary[]; error?: string },
): RunsScreenState {
  if (result.error !== undefined) {
    return { ...state, banner: result.error };
  }
  return { runs: result.runs ?? [], banner: null, loaded: true };
}

export function emptyStateMessage(state: RunsScreenState): string | null {
  if (!state.loaded || state.runs.length > 0) return null;
  return "No runs yet. Start one with: p1 backtest --config <cfg>";
}

// -- review queue ------------------------------------------------------------

export const ACTIONS = ["Buy", "Sell", "Hold"] as const;

export interface OverrideForm {
  newAction: string;
  note: string;
}

export interface OverrideValidation {
  ok: boolean;
  reason: string | null;
}

/** Client-side mirror of the server rules; the server stays the truth. */
export function validateOverride(item: PendingItem, form: OverrideForm): OverrideValidation {
  if (!ACTIONS.includes(form.newAction as (typeof ACTIONS)[number])) {
    return { ok: false, reason: "choose an action" };
  }
  if (form.newAction === item.proposed.action) {
    return { ok: false, reason: "override must differ from the proposed action" };
  }
  if (form.note.trim().length === 0) {
    return { ok: false, reason: "a note is required" };
  }
  return { ok: true, reason: null };
}

export function queueView(pending: PendingItem[]): PendingItem[] {
  return [...pending].sort((a, b) =>
    a.date === b.date ? a.id.localeCompare(b.id) : a.date.localeCompare(b.date),
  );
}

// -- report viewer -------------------------------------------------------------

export const MISSING_REPORT_PLACEHOLDER = "No report available for this date.";
