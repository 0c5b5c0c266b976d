// Page wiring for the screening form. All markup is built from here so
// the shell page stays a bare <div>; tests drive the same entry point
// with a synthetic document and a stub server.

import { ApiError, getHealth, postScore } from "./api.js";
import type { FetchLike, NamedBlob, ScoreResponse } from "./api.js";
import { CONTEXT_FIELDS, TRAVEL_VALUES, buildContextPayload, canSubmit, fieldError } from "./schema.js";
import type { FieldSpec, FormValues } from "./schema.js";
import { blobToWav, startRecording } from "./recorder.js";
import type { RecordingSession } from "./recorder.js";
import { resultView } from "./view.js";

const SLOTS = 3;
const GAUGE_KEYS = ["cough", "context", "ensemble"] as const;

export interface AppOptions {
  /** Service origin; "" means same-origin relative paths. */
  baseUrl?: string;
  fetchImpl?: FetchLike;
  /** Ping /v1/health on startup (default true). */
  checkHealth?: boolean;
}

export interface AppHandle {
  element: HTMLElement;
  /** Resolves once the startup health check has settled. */
  ready: Promise<void>;
  attach(slot: number, blob: Blob, name: string): void;
  clear(slot: number): void;
  submit(): Promise<void>;
  /** Resolves when no submission is in flight. */
  settled(): Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function fieldControl(doc: Document, spec: FieldSpec): HTMLElement {
  if (spec.kind === "number") {
    const input = el(doc, "input", {
      type: "number",
      min: "0",
      step: String(spec.step ?? 1),
      "data-field": spec.key,
    });
    return input;
  }
  const select = el(doc, "select", { "data-field": spec.key });
  const options =
    spec.kind === "yesno" ? ["", "yes", "no"] : ["", ...TRAVEL_VALUES];
  for (const value of options) {
    const opt = el(doc, "option", { value }, value === "" ? "unanswered" : value);
    select.appendChild(opt);
  }
  return select;
}

export function initApp(root: HTMLElement, opts: AppOptions = {}): AppHandle {
  const doc = root.ownerDocument;
  const baseUrl = opts.baseUrl ?? "";
  const fetchImpl = opts.fetchImpl;

  const recordings: (NamedBlob | null)[] = new Array(SLOTS).fill(null);
  const sessions: (RecordingSession | null)[] = new Array(SLOTS).fill(null);
  let pending = false;
  let inFlight: Promise<void> | null = null;

  root.textContent = "";
  const heading = el(doc, "h1", {}, "Cough screening");
  const statusLine = el(doc, "p", { id: "service-status" }, "");

  // --- recording slots ---------------------------------------------------
  const slotsBox = el(doc, "section", { id: "slots" });
  slotsBox.appendChild(el(doc, "h2", {}, "Recordings"));
  slotsBox.appendChild(
    el(doc, "p", { class: "hint" },
      "Up to three coughs. Record with the microphone or pick a file."),
  );
  const slotEls: HTMLElement[] = [];
  for (let k = 0; k < SLOTS; k++) {
    const slot = el(doc, "div", { class: "slot", "data-slot": String(k) });
    slot.appendChild(el(doc, "span", { class: "slot-title" }, `Recording ${k + 1}`));
    slot.appendChild(el(doc, "button", { class: "slot-record", type: "button" }, "Record"));
    slot.appendChild(el(doc, "input", { class: "slot-file", type: "file", accept: "audio/*" }));
    const clearBtn = el(doc, "button", { class: "slot-clear", type: "button", hidden: "" }, "Clear");
    slot.appendChild(clearBtn);
    slot.appendChild(el(doc, "span", { class: "slot-status" }, "empty"));
    slotsBox.appendChild(slot);
    slotEls.push(slot);
  }

  // --- questionnaire -----------------------------------------------------
  const form = el(doc, "section", { id: "context-form" });
  form.appendChild(el(doc, "h2", {}, "Questionnaire"));
  for (const spec of CONTEXT_FIELDS) {
    const row = el(doc, "div", { class: "field" });
    const labelText = spec.unit ? `${spec.label} (${spec.unit})` : spec.label;
    row.appendChild(el(doc, "label", {}, labelText));
    row.appendChild(fieldControl(doc, spec));
    row.appendChild(el(doc, "span", { class: "field-error", "data-error-for": spec.key }, ""));
    form.appendChild(row);
  }

  const submitBtn = el(doc, "button", { id: "submit-btn", type: "button", disabled: "" }, "Score");
  const formError = el(doc, "p", { id: "form-error" }, "");

  // --- result view -------------------------------------------------------
  const result = el(doc, "section", { id: "result" });
  result.hidden = true;
  result.appendChild(el(doc, "h2", {}, "Result"));
  const badge = el(doc, "span", { id: "badge", class: "badge" }, "");
  badge.hidden = true;
  result.appendChild(badge);
  for (let i = 0; i < GAUGE_KEYS.length; i++) {
    const g = el(doc, "div", { class: "gauge", "data-gauge": GAUGE_KEYS[i] });
    g.appendChild(el(doc, "span", { class: "gauge-label" }, ""));
    const track = el(doc, "div", { class: "gauge-track" });
    track.appendChild(el(doc, "div", { class: "gauge-bar" }));
    g.appendChild(track);
    g.appendChild(el(doc, "span", { class: "gauge-value" }, ""));
    result.appendChild(g);
  }
  const note = el(doc, "p", { id: "flag-note" }, "");
  note.hidden = true;
  result.appendChild(note);
  const footer = el(doc, "p", { id: "model-footer" }, "");
  result.appendChild(footer);

  for (const piece of [heading, statusLine, slotsBox, form, submitBtn, formError, result]) {
    root.appendChild(piece);
  }

  // --- state -------------------------------------------------------------
  function readValues(): FormValues {
    const values: FormValues = {};
    for (const spec of CONTEXT_FIELDS) {
      const control = form.querySelector(`[data-field="${spec.key}"]`) as
        | HTMLInputElement
        | HTMLSelectElement;
      values[spec.key] = control.value;
    }
    return values;
  }

  function refresh(): void {
    const values = readValues();
    for (const spec of CONTEXT_FIELDS) {
      const span = form.querySelector(`[data-error-for="${spec.key}"]`) as HTMLElement;
      span.textContent = fieldError(spec, values[spec.key] ?? "") ?? "";
    }
    const count = recordings.filter((r) => r !== null).length;
    submitBtn.disabled = pending || !canSubmit(count, values);
  }

  function setStatus(slot: number, text: string): void {
    (slotEls[slot].querySelector(".slot-status") as HTMLElement).textContent = text;
  }

  function attach(slot: number, blob: Blob, name: string): void {
    recordings[slot] = { blob, name };
    const kb = Math.max(1, Math.round(blob.size / 1024));
    setStatus(slot, `${name} (${kb} kB)`);
    const clearBtn = slotEls[slot].querySelector(".slot-clear") as HTMLButtonElement;
    clearBtn.hidden = false;
    const old = slotEls[slot].querySelector("audio");
    if (old) old.remove();
    // playback control, when the runtime can mint a URL for this blob
    if (typeof URL !== "undefined" && typeof URL.createObjectURL === "function") {
      try {
        const audio = el(doc, "audio", { controls: "" });
        audio.src = URL.createObjectURL(blob);
        slotEls[slot].appendChild(audio);
      } catch {
        // playback is optional; scoring does not depend on it
      }
    }
    refresh();
  }

  function clear(slot: number): void {
    recordings[slot] = null;
    setStatus(slot, "empty");
    (slotEls[slot].querySelector(".slot-clear") as HTMLButtonElement).hidden = true;
    const old = slotEls[slot].querySelector("audio");
    if (old) old.remove();
    refresh();
  }

  function renderResult(resp: ScoreResponse): void {
    const view = resultView(resp);
    view.gauges.forEach((g, i) => {
      const host = result.querySelector(`[data-gauge="${GAUGE_KEYS[i]}"]`) as HTMLElement;
      (host.querySelector(".gauge-label") as HTMLElement).textContent = g.label;
      (host.querySelector(".gauge-value") as HTMLElement).textContent = g.text;
      (host.querySelector(".gauge-bar") as HTMLElement).style.width = `${g.percent ?? 0}%`;
      host.classList.toggle("gauge-na", g.percent === null);
    });
    badge.hidden = view.badge === null;
    badge.textContent =
      view.badge === "symptomatic"
        ? "Symptomatic"
        : view.badge === "asymptomatic"
          ? "No symptoms reported"
          : "";
    badge.className = view.badge === "symptomatic" ? "badge on" : "badge off";
    note.hidden = view.note === null;
    note.textContent = view.note ?? "";
    footer.textContent = view.footer;
    result.hidden = false;
  }

  function submit(): Promise<void> {
    if (pending) return inFlight ?? Promise.resolve();
    pending = true;
    formError.textContent = "";
    refresh();
    const run = (async () => {
      try {
        const values = readValues();
        const recs = recordings.filter((r): r is NamedBlob => r !== null);
        const resp = await postScore(baseUrl, recs, buildContextPayload(values), fetchImpl);
        renderResult(resp);
      } catch (err) {
        result.hidden = true;
        formError.textContent =
          err instanceof ApiError
            ? `the service rejected this submission: ${err.message}`
            : "network error: check that the scoring service is reachable, then retry";
      } finally {
        pending = false;
        refresh();
      }
    })();
    inFlight = run;
    return run;
  }

  // --- event wiring ------------------------------------------------------
  for (const spec of CONTEXT_FIELDS) {
    const control = form.querySelector(`[data-field="${spec.key}"]`) as HTMLElement;
    control.addEventListener("input", refresh);
    control.addEventListener("change", refresh);
  }

  for (let k = 0; k < SLOTS; k++) {
    const slot = slotEls[k];
    const recordBtn = slot.querySelector(".slot-record") as HTMLButtonElement;
    const fileInput = slot.querySelector(".slot-file") as HTMLInputElement;
    const clearBtn = slot.querySelector(".slot-clear") as HTMLButtonElement;

    recordBtn.addEventListener("click", () => {
      void (async () => {
        const active = sessions[k];
        if (active) {
          sessions[k] = null;
          recordBtn.textContent = "Record";
          try {
            const rec = await active.stop();
            attach(k, rec.wav, `cough-${k + 1}.wav`);
            setStatus(k, `cough-${k + 1}.wav (${rec.durationS.toFixed(1)} s)`);
          } catch {
            setStatus(k, "recording failed, use the file picker");
          }
          return;
        }
        try {
          sessions[k] = await startRecording();
          recordBtn.textContent = "Stop";
          setStatus(k, "recording…");
        } catch {
          setStatus(k, "microphone unavailable, use the file picker");
        }
      })();
    });

    fileInput.addEventListener("change", () => {
      const file = fileInput.files?.[0];
      if (!file) return;
      const isWav =
        file.name.toLowerCase().endsWith(".wav") ||
        file.type === "audio/wav" ||
        file.type === "audio/x-wav";
      if (isWav) {
        attach(k, file, file.name);
        return;
      }
      setStatus(k, "converting…");
      blobToWav(file).then(
        (rec) => attach(k, rec.wav, file.name.replace(/\.[^.]*$/, "") + ".wav"),
        () => setStatus(k, "could not decode that file"),
      );
    });

    clearBtn.addEventListener("click", () => clear(k));
  }

  submitBtn.addEventListener("click", () => {
    void submit();
  });

  const ready =
    (opts.checkHealth ?? true)
      ? getHealth(baseUrl, fetchImpl).then(
          (h) => {
            statusLine.textContent = `service ${h.status}`;
          },
          () => {
            statusLine.textContent = "service unreachable";
          },
        )
      : Promise.resolve();

  refresh();

  return {
    element: root,
    ready,
    attach,
    clear,
    submit,
    settled: () => (inFlight ?? Promise.resolve()).then(() => undefined),
  };
}
