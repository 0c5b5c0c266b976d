// Questionnaire schema, kept in lockstep with the service's manifest
// parser: continuous fields are non-negative finite numbers, symptom
// and exposure flags are yes/no, travel history is a fixed enum.
// Unanswered fields are omitted from the payload rather than sent as
// nulls.

export const TRAVEL_VALUES = [
  "No",
  "InterDistrict",
  "InterState",
  "InterCountry",
] as const;

export type TravelValue = (typeof TRAVEL_VALUES)[number];

export type FieldKind = "number" | "yesno" | "travel";

export interface FieldSpec {
  key: string;
  label: string;
  kind: FieldKind;
  unit?: string;
  step?: number;
}

export const CONTEXT_FIELDS: readonly FieldSpec[] = [
  { key: "age", label: "Age", kind: "number", unit: "years", step: 1 },
  { key: "temperature", label: "Body temperature", kind: "number", unit: "°C", step: 0.1 },
  { key: "days_cough", label: "Days with cough", kind: "number", unit: "days", step: 1 },
  { key: "days_sob", label: "Days with shortness of breath", kind: "number", unit: "days", step: 1 },
  { key: "days_fever", label: "Days with fever", kind: "number", unit: "days", step: 1 },
  { key: "has_cough", label: "Cough present", kind: "yesno" },
  { key: "has_sob", label: "Shortness of breath", kind: "yesno" },
  { key: "has_fever", label: "Fever", kind: "yesno" },
  { key: "contact_confirmed", label: "Contact with a confirmed case", kind: "yesno" },
  { key: "is_health_worker", label: "Health worker", kind: "yesno" },
  { key: "travel_history", label: "Recent travel", kind: "travel" },
];

/** Raw control values keyed by field; "" means unanswered. */
export type FormValues = Record<string, string>;

export function fieldError(spec: FieldSpec, raw: string): string | null {
  if (raw === "") return null;
  if (spec.kind === "number") {
    const v = Number(raw);
    if (!Number.isFinite(v)) return "must be a number";
    if (v < 0) return "must not be negative";
    return null;
  }
  if (spec.kind === "yesno") {
    return raw === "yes" || raw === "no" ? null : "answer yes or no";
  }
  return (TRAVEL_VALUES as readonly string[]).includes(raw)
    ? null
    : "unknown travel category";
}

export function formErrors(values: FormValues): Record<string, string> {
  const errors: Record<string, string> = {};
  for (const spec of CONTEXT_FIELDS) {
    const err = fieldError(spec, values[spec.key] ?? "");
    if (err !== null) errors[spec.key] = err;
  }
  return errors;
}

/** Every field answered and none of the answers invalid. */
export function contextComplete(values: FormValues): boolean {
  return CONTEXT_FIELDS.every((spec) => {
    const raw = values[spec.key] ?? "";
    return raw !== "" && fieldError(spec, raw) === null;
  });
}

// A submission needs something for at least one model: any recording,
// or the full questionnaire. Invalid answers block either way.
export function canSubmit(recordingCount: number, values: FormValues): boolean {
  if (Object.keys(formErrors(values)).length > 0) return false;
  return recordingCount > 0 || contextComplete(values);
}

/**
 * Answered fields as the JSON object the service expects: numbers for
 * the continuous fields, "yes"/"no" strings for the flags, canonical
 * travel values. Returns null when nothing was answered, in which case
 * the context part is left out of the upload entirely.
 */
export function buildContextPayload(
  values: FormValues,
): Record<string, number | string> | null {
  const payload: Record<string, number | string> = {};
  for (const spec of CONTEXT_FIELDS) {
    const raw = values[spec.key] ?? "";
    if (raw === "") continue;
    if (fieldError(spec, raw) !== null) {
      throw new Error(`invalid value for ${spec.key}: ${raw}`);
    }
    payload[spec.key] = spec.kind === "number" ? Number(raw) : raw;
  }
  return Object.keys(payload).length > 0 ? payload : null;
}
