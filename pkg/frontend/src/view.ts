// Maps a score response onto display strings. Pure so the rendering
// rules are testable without a DOM.

import type { ScoreResponse } from "./api.js";

export interface GaugeView {
  label: string;
  /** Bar fill 0..100, null when the modality was not assessed. */
  percent: number | null;
  text: string;
}

export interface ResultViewModel {
  gauges: GaugeView[];
  badge: "symptomatic" | "asymptomatic" | null;
  note: string | null;
  footer: string;
}

export function formatPercent(p: number): string {
  const pct = Math.round(p * 1000) / 10;
  return (Number.isInteger(pct) ? pct.toFixed(0) : pct.toFixed(1)) + "%";
}

function gauge(label: string, p: number | null): GaugeView {
  if (p === null) return { label, percent: null, text: "not assessed" };
  return { label, percent: p * 100, text: formatPercent(p) };
}

export function resultView(r: ScoreResponse): ResultViewModel {
  const gauges = [
    gauge("Cough model", r.p_cough),
    gauge("Context model", r.p_context),
    gauge("Combined", r.p_ensemble),
  ];
  const badge =
    r.symptomatic === null ? null : r.symptomatic ? "symptomatic" : "asymptomatic";
  const note =
    r.flag === "cough-only"
      ? "No questionnaire was given; the cough model stands alone."
      : r.flag === "context-only"
        ? "No recordings were given; the questionnaire model stands alone."
        : null;
  const versions = Object.entries(r.model_versions)
    .map(([k, v]) => `${k} ${v}`)
    .join(", ");
  const footer = versions.length > 0 ? `models: ${versions}` : "models: unknown";
  return { gauges, badge, note, footer };
}
