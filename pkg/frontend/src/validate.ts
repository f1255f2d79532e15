/** Client-side mirror of the service's analysis submission checks.
 *
 * The service stays the authority; this exists so the form can flag
 * problems before a request is in flight. To keep the two in agreement the
 * stages are copied exactly: shape problems reject first, then unknown or
 * mistyped parameters (range checks never run in that case), then the
 * per-study range rules over the defaults-filled effective map. The
 * messages are the service's own strings, which lets tests compare the
 * two verdicts verbatim.
 */

import type { FieldErrorWire, StudyFieldWire, StudySchemasWire } from "./wire";

export type ParamValue = number | boolean | string | null | unknown;

export interface ValidationOk {
  ok: true;
  effective: Record<string, number | boolean | string>;
}

export interface ValidationFailed {
  ok: false;
  /** 0: request shape, 1: unknown/mistyped params, 2: range rules. */
  stage: 0 | 1 | 2;
  errors: FieldErrorWire[];
}

export type Validation = ValidationOk | ValidationFailed;

const STUDY_ORDER = ["lifetime", "flux", "shower"];

function fieldByName(schema: StudyFieldWire[], name: string): StudyFieldWire | undefined {
  return schema.find((f) => f.name === name);
}

function withDoc(
  schema: StudyFieldWire[],
  field: string,
  message: string,
): FieldErrorWire {
  const item: FieldErrorWire = { field, message };
  const f = fieldByName(schema, field);
  if (f && f.doc) item.doc = f.doc;
  return item;
}

/** Same widening rules as the service: int fits a float slot, bool fits nothing else. */
function coerce(
  raw: unknown,
  type: StudyFieldWire["type"],
): number | boolean | string | null {
  if (type === "boolean") return typeof raw === "boolean" ? raw : null;
  if (type === "string") return typeof raw === "string" ? raw : null;
  if (typeof raw !== "number" || !Number.isFinite(raw)) return null;
  if (type === "integer") return Number.isInteger(raw) ? raw : null;
  return raw;
}

export function validateSubmission(
  schemas: StudySchemasWire,
  study: string,
  inputs: string[],
  params: Record<string, ParamValue>,
): Validation {
  const shape = shapeError(schemas, study, inputs);
  if (shape) return { ok: false, stage: 0, errors: [shape] };

  const schema = schemas[study].params;
  const effective: Record<string, number | boolean | string> = {};
  for (const f of schema) {
    effective[f.name] = f.default as number | boolean | string;
  }

  const typeErrors: FieldErrorWire[] = [];
  for (const [key, raw] of Object.entries(params)) {
    const f = fieldByName(schema, key);
    if (!f) {
      typeErrors.push({ field: key, message: "unknown parameter" });
      continue;
    }
    const value = coerce(raw, f.type);
    if (value === null) {
      typeErrors.push(withDoc(schema, key, `expected ${f.type}`));
      continue;
    }
    effective[key] = value;
  }
  if (typeErrors.length > 0) return { ok: false, stage: 1, errors: typeErrors };

  if (study === "lifetime" && !("hist_max_us" in params)) {
    // The histogram tracks the gate unless the display cap wins.
    effective["hist_max_us"] = Math.min((effective["gate_width_s"] as number) * 1e6, 20.0);
  }

  const errors: FieldErrorWire[] = [];
  const bad = (field: string, message: string) => errors.push(withDoc(schema, field, message));
  const num = (name: string) => effective[name] as number;

  if (study === "lifetime") {
    if (num("coincidence_level") < 1) bad("coincidence_level", "must be at least 1");
    if (num("bins") < 2) bad("bins", "must be at least 2");
    if (num("gate_width_s") <= 0) bad("gate_width_s", "must be positive");
    if (num("trigger_window_ns") <= 0) bad("trigger_window_ns", "must be positive");
    if (num("energy_threshold_ns") < 0) bad("energy_threshold_ns", "must not be negative");
    if (num("fit_min_us") <= 0) bad("fit_min_us", "must be positive");
    if (num("fit_min_us") >= num("fit_max_us")) {
      bad("fit_min_us", "must be below fit_max_us");
      bad("fit_max_us", "must be above fit_min_us");
    }
    if (num("gate_width_s") > 0 && num("fit_max_us") > num("gate_width_s") * 1e6) {
      bad("fit_max_us", "exceeds the decay gate");
    }
    if (num("hist_max_us") <= 0) bad("hist_max_us", "must be positive");
  } else if (study === "flux") {
    if (num("bin_width_s") <= 0) bad("bin_width_s", "must be positive");
    if (num("coincidence_level") < 1) bad("coincidence_level", "must be at least 1");
  } else {
    if (num("window_s") <= 0) bad("window_s", "must be positive");
    if (num("min_detectors") < 2) {
      bad("min_detectors", "must be at least 2");
    } else if (num("min_detectors") > inputs.length) {
      bad("min_detectors", `only ${inputs.length} detectors submitted`);
    }
  }
  if (errors.length > 0) return { ok: false, stage: 2, errors };
  return { ok: true, effective };
}

function shapeError(
  schemas: StudySchemasWire,
  study: string,
  inputs: string[],
): FieldErrorWire | null {
  if (!(study in schemas)) {
    return { field: "study", message: `study must be one of: ${STUDY_ORDER.join(", ")}` };
  }
  if (inputs.length === 0) {
    return { field: "inputs", message: "inputs must be a nonempty list of file names" };
  }
  if (study === "shower") {
    if (inputs.length < 2) {
      return { field: "inputs", message: "shower search needs at least two datasets" };
    }
  } else if (inputs.length !== 1) {
    return { field: "inputs", message: `${study} takes exactly one dataset` };
  }
  return null;
}

/** Map raw form text to the JSON value the request would carry.
 *
 * Empty text means "use the default" and yields no parameter at all.
 * Unparseable numeric text is sent as the string so the service (and the
 * mirror above) reject it with the same expected-<type> message.
 */
export function formValue(
  field: StudyFieldWire,
  text: string,
): number | string | null {
  const trimmed = text.trim();
  if (trimmed === "") return null;
  if (field.type === "string") return text;
  const parsed = Number(trimmed);
  return Number.isFinite(parsed) ? parsed : text;
}
