/** Search results table with sticky row selection.
 *
 * Every cell is copied straight out of the search payload: the name,
 * school, date, and pulse count columns show the catalog's metadata values
 * with no reformatting, which is what lets the fixture suite compare DOM
 * text against the raw payload. Checkbox state comes from the caller so a
 * tick survives paging.
 */

import { el } from "../render";
import { metadataValue, type CatalogObjectWire, type SearchPageWire } from "../wire";

export interface DatasetTableOptions {
  isSelected: (lfn: string) => boolean;
  onToggle: (row: CatalogObjectWire, on: boolean) => void;
  onPage: (page: number) => void;
  onRowDetail?: (row: CatalogObjectWire) => void;
}

const COLUMNS: { title: string; attribute: string }[] = [
  { title: "Name", attribute: "name" },
  { title: "School", attribute: "school" },
  { title: "Date", attribute: "date" },
  { title: "Pulses", attribute: "pulse_count" },
];

export function renderDatasetTable(
  page: SearchPageWire,
  options: DatasetTableOptions,
): HTMLElement {
  if (page.total === 0) {
    return el(
      "div",
      { class: "dataset-table empty-state" },
      "No data files match this search.",
    );
  }

  const head = el(
    "tr",
    {},
    el("th", {}, ""),
    ...COLUMNS.map((c) => el("th", {}, c.title)),
  );
  const body = el("tbody", {});
  for (const row of page.items) {
    const lfn = metadataValue(row, "name") || row.name;
    const checkbox = el("input", { type: "checkbox", "data-lfn": lfn });
    checkbox.checked = options.isSelected(lfn);
    checkbox.addEventListener("change", () => options.onToggle(row, checkbox.checked));
    const cells = COLUMNS.map((c) =>
      el("td", { "data-attribute": c.attribute }, metadataValue(row, c.attribute)),
    );
    const tr = el("tr", { "data-row": lfn }, el("td", {}, checkbox), ...cells);
    if (options.onRowDetail) {
      tr.addEventListener("click", (event) => {
        if ((event.target as HTMLElement).tagName !== "INPUT") options.onRowDetail?.(row);
      });
    }
    body.appendChild(tr);
  }

  const prev = el("button", { type: "button", class: "page-prev" }, "‹ prev");
  const next = el("button", { type: "button", class: "page-next" }, "next ›");
  prev.disabled = page.page <= 1;
  next.disabled = page.page >= page.pages;
  prev.addEventListener("click", () => options.onPage(page.page - 1));
  next.addEventListener("click", () => options.onPage(page.page + 1));
  const pager = el(
    "div",
    { class: "pager" },
    prev,
    el("span", { class: "page-where" }, `page ${page.page} of ${page.pages} (${page.total} files)`),
    next,
  );

  return el(
    "div",
    { class: "dataset-table" },
    el("table", {}, el("thead", {}, head), body),
    pager,
  );
}

/** Inline rendering of a query syntax error, caret under the position. */
export function renderQueryError(q: string, message: string, position?: number): HTMLElement {
  const box = el("div", { class: "query-error", role: "alert" });
  box.appendChild(el("div", { class: "query-error-message" }, message));
  if (position !== undefined && position >= 0) {
    const caret = " ".repeat(position) + "^";
    box.appendChild(el("pre", { class: "query-error-caret" }, `${q}\n${caret}`));
  }
  return box;
}
