/** The group's research logbook, one entry per milestone moment.
 *
 * Students write entries against a milestone and read their own trail.
 * A teacher additionally gets the per-milestone overview of their class
 * and a comment box under each student entry; both affordances stay
 * hidden for student sessions because the service would refuse them
 * anyway.
 */

import { el } from "../render";
import type { LogbookEntryWire, MilestoneWire } from "../wire";

export interface LogbookPanelOptions {
  role: string;
  milestones: MilestoneWire[];
  onWrite: (milestone: string, body: string) => void;
  onOverview?: (milestone: string) => void;
  onGrade?: (entryId: string, body: string) => void;
}

export function renderLogbookEntry(
  entry: LogbookEntryWire,
  options: Pick<LogbookPanelOptions, "role" | "onGrade">,
): HTMLElement {
  const item = el(
    "li",
    { class: "logbook-entry", "data-entry": entry.entry_id },
    el("div", { class: "entry-milestone" }, entry.milestone_title),
    el("div", { class: "entry-body" }, entry.body),
    el(
      "div",
      { class: "entry-byline" },
      `${entry.author_role} entry, ${entry.created_at}`,
    ),
  );
  if (entry.teacher_comment) {
    item.appendChild(el("div", { class: "teacher-comment" }, entry.teacher_comment));
  }
  if (options.role === "teacher" && options.onGrade) {
    const box = el("input", { type: "text", placeholder: "teacher comment" });
    const send = el("button", { type: "button" }, "Comment");
    send.addEventListener("click", () => options.onGrade?.(entry.entry_id, box.value));
    item.appendChild(el("div", { class: "grade-row" }, box, send));
  }
  return item;
}

export function renderLogbookPanel(
  entries: LogbookEntryWire[],
  options: LogbookPanelOptions,
): HTMLElement {
  const milestoneSelect = el("select", { "data-field": "milestone" });
  for (const m of options.milestones) {
    milestoneSelect.appendChild(el("option", { value: m.id }, m.title));
  }
  const body = el("textarea", { rows: "3", "data-field": "entry-body" });
  const error = el("span", { class: "form-error", role: "alert" });
  const write = el("button", { type: "submit" }, "Add entry");
  const form = el(
    "form",
    { class: "logbook-form" },
    milestoneSelect,
    body,
    write,
    error,
  );
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    error.textContent = "";
    options.onWrite(milestoneSelect.value, body.value);
  });

  const list = el(
    "ol",
    { class: "logbook-entries" },
    ...entries.map((e) => renderLogbookEntry(e, options)),
  );

  const root = el("div", { class: "logbook-panel" }, form, list);
  if (options.role === "teacher" && options.onOverview) {
    const pick = el("select", { class: "overview-pick" });
    for (const m of options.milestones) {
      pick.appendChild(el("option", { value: m.id }, m.title));
    }
    const go = el("button", { type: "button" }, "Class overview");
    go.addEventListener("click", () => options.onOverview?.(pick.value));
    root.prepend(el("div", { class: "overview-row" }, pick, go));
  }
  return root;
}
