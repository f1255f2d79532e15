/** Parameter form for one study, built from the service's schema.
 *
 * The service decides what fields exist; the form just walks the schema.
 * Checks run through the validation mirror before anything goes on the
 * wire, and a field that fails shows the message next to itself. Fields
 * that carry an annotation get a pop-up help link.
 */

import { annotationLink } from "../glossary";
import { el, mount } from "../render";
import { formValue, validateSubmission } from "../validate";
import type { FieldErrorWire, StudyFieldWire, StudySchemasWire } from "../wire";

export interface AnalysisFormOptions {
  selectedLfns: string[];
  draft: Record<string, string>;
  onStudyChange: (study: string) => void;
  onDraftChange: (field: string, text: string) => void;
  /** Called only when the client-side mirror is satisfied. */
  onSubmit: (study: string, inputs: string[], params: Record<string, unknown>) => void;
}

export interface AnalysisFormHandle {
  root: HTMLElement;
  /** Bind a 400 payload's per-field messages onto the form. */
  showErrors(errors: FieldErrorWire[]): void;
  showRequestError(message: string): void;
}

function inputFor(field: StudyFieldWire, draft: Record<string, string>): HTMLInputElement {
  if (field.type === "boolean") {
    const box = el("input", { type: "checkbox", "data-field": field.name });
    box.checked = draft[field.name] === "true" || (draft[field.name] === undefined && field.default === true);
    return box;
  }
  const input = el("input", {
    type: "text",
    "data-field": field.name,
    placeholder: field.default === null ? "" : String(field.default),
  });
  input.value = draft[field.name] ?? "";
  return input;
}

export function renderAnalysisForm(
  schemas: StudySchemasWire,
  study: string,
  options: AnalysisFormOptions,
): AnalysisFormHandle {
  const schema = schemas[study];
  const requestError = el("div", { class: "form-error", role: "alert" });
  const errorSlots = new Map<string, HTMLElement>();
  const inputs = new Map<string, HTMLInputElement>();

  const studySelect = el("select", { "data-field": "study" });
  for (const name of Object.keys(schemas)) {
    const option = el("option", { value: name }, name);
    if (name === study) option.selected = true;
    studySelect.appendChild(option);
  }
  studySelect.addEventListener("change", () => options.onStudyChange(studySelect.value));

  const selectionNote =
    schema.inputs === "many"
      ? `${options.selectedLfns.length} selected data files`
      : options.selectedLfns.length === 1
        ? options.selectedLfns[0]
        : `${options.selectedLfns.length} selected (this study takes one)`;

  const rows: HTMLElement[] = [];
  for (const field of schema.params) {
    const input = inputFor(field, options.draft);
    inputs.set(field.name, input);
    input.addEventListener("input", () =>
      options.onDraftChange(
        field.name,
        field.type === "boolean" ? String(input.checked) : input.value,
      ),
    );
    const slot = el("span", { class: "field-error", "data-error-for": field.name });
    errorSlots.set(field.name, slot);
    const label = el("label", {}, field.name, " ");
    if (field.doc) label.appendChild(annotationLink(field.name, field.doc));
    rows.push(el("div", { class: "form-row", "data-row-for": field.name }, label, input, slot));
  }

  const submit = el("button", { type: "submit", class: "run-analysis" }, "Run analysis");
  const form = el(
    "form",
    { class: "analysis-form" },
    el("div", { class: "form-row" }, el("label", {}, "study "), studySelect),
    el("div", { class: "form-row inputs-note" }, selectionNote),
    ...rows,
    requestError,
    submit,
  );

  const clearErrors = () => {
    requestError.textContent = "";
    for (const slot of errorSlots.values()) slot.textContent = "";
  };

  const showErrors = (errors: FieldErrorWire[]) => {
    clearErrors();
    for (const issue of errors) {
      const slot = errorSlots.get(issue.field);
      if (slot) slot.textContent = issue.message;
      else requestError.append(el("div", {}, `${issue.field}: ${issue.message}`));
    }
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    clearErrors();
    const params: Record<string, unknown> = {};
    for (const field of schema.params) {
      const input = inputs.get(field.name) as HTMLInputElement;
      if (field.type === "boolean") {
        // Unticked equals the default false; send only a deviation.
        if (input.checked !== field.default) params[field.name] = input.checked;
        continue;
      }
      const value = formValue(field, input.value);
      if (value !== null) params[field.name] = value;
    }
    const verdict = validateSubmission(schemas, study, options.selectedLfns, params);
    if (!verdict.ok) {
      showErrors(verdict.errors);
      return;
    }
    options.onSubmit(study, options.selectedLfns, params);
  });

  return {
    root: form,
    showErrors,
    showRequestError(message: string) {
      mount(requestError, message);
    },
  };
}
