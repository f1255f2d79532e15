/** Poster authoring and display.
 *
 * A poster is a title, an author list, four prose sections, and a set of
 * figures picked from the group's saved plots and DAGs. The published
 * view renders exactly what the poster payload carries, plus the comment
 * thread for its object id.
 */

import { el } from "../render";
import type { PosterWire } from "../wire";

export const POSTER_SECTIONS = [
  "abstract",
  "procedures",
  "results",
  "discussion_conclusions",
] as const;

export type PosterSection = (typeof POSTER_SECTIONS)[number];

const SECTION_TITLES: Record<PosterSection, string> = {
  abstract: "Abstract",
  procedures: "Procedures",
  results: "Results",
  discussion_conclusions: "Discussion and conclusions",
};

export interface PosterDraft {
  title: string;
  authors: string;
  sections: Record<PosterSection, string>;
  figures: string[];
}

export function emptyPosterDraft(): PosterDraft {
  return {
    title: "",
    authors: "",
    sections: {
      abstract: "",
      procedures: "",
      results: "",
      discussion_conclusions: "",
    },
    figures: [],
  };
}

export interface PosterEditorOptions {
  /** Figure names the group can choose from (saved plots and DAGs). */
  availableFigures: string[];
  onPublish: (draft: PosterDraft) => void;
}

export function renderPosterEditor(
  draft: PosterDraft,
  options: PosterEditorOptions,
): HTMLElement {
  const title = el("input", { type: "text", "data-field": "title", placeholder: "Poster title" });
  title.value = draft.title;
  const authors = el("input", {
    type: "text",
    "data-field": "authors",
    placeholder: "authors, comma separated (blank: your group name)",
  });
  authors.value = draft.authors;

  const sectionBoxes = new Map<PosterSection, HTMLTextAreaElement>();
  const sectionRows = POSTER_SECTIONS.map((section) => {
    const box = el("textarea", { rows: "4", "data-field": section });
    box.value = draft.sections[section];
    sectionBoxes.set(section, box);
    return el("div", { class: "poster-section" }, el("label", {}, SECTION_TITLES[section]), box);
  });

  const figurePicks = new Map<string, HTMLInputElement>();
  const figureRows = options.availableFigures.map((name) => {
    const box = el("input", { type: "checkbox", "data-figure": name });
    box.checked = draft.figures.includes(name);
    figurePicks.set(name, box);
    return el("label", { class: "figure-pick" }, box, name);
  });

  const error = el("div", { class: "form-error", role: "alert" });
  const publish = el("button", { type: "submit" }, "Publish poster");
  const form = el(
    "form",
    { class: "poster-editor" },
    el("div", { class: "poster-field" }, el("label", {}, "Title"), title),
    el("div", { class: "poster-field" }, el("label", {}, "Authors"), authors),
    ...sectionRows,
    el(
      "div",
      { class: "poster-figures" },
      el("label", {}, "Figures"),
      figureRows.length > 0
        ? el("div", {}, ...figureRows)
        : el("span", { class: "empty-state" }, "no saved figures yet (a poster without figures is fine)"),
    ),
    error,
    publish,
  );
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    error.textContent = "";
    if (!title.value.trim()) {
      error.textContent = "poster needs a title";
      return;
    }
    const next: PosterDraft = {
      title: title.value,
      authors: authors.value,
      sections: {
        abstract: sectionBoxes.get("abstract")?.value ?? "",
        procedures: sectionBoxes.get("procedures")?.value ?? "",
        results: sectionBoxes.get("results")?.value ?? "",
        discussion_conclusions: sectionBoxes.get("discussion_conclusions")?.value ?? "",
      },
      figures: [...figurePicks.entries()].filter(([, box]) => box.checked).map(([name]) => name),
    };
    options.onPublish(next);
  });
  return form;
}

/** Turn the editor draft into the request body the service expects. */
export function posterRequestBody(draft: PosterDraft): {
  title: string;
  authors?: string[];
  abstract: string;
  procedures: string;
  results: string;
  discussion_conclusions: string;
  figures: string[];
} {
  const authorList = draft.authors
    .split(",")
    .map((a) => a.trim())
    .filter((a) => a.length > 0);
  return {
    title: draft.title,
    ...(authorList.length > 0 ? { authors: authorList } : {}),
    abstract: draft.sections.abstract,
    procedures: draft.sections.procedures,
    results: draft.sections.results,
    discussion_conclusions: draft.sections.discussion_conclusions,
    figures: draft.figures,
  };
}

export interface PosterViewOptions {
  /** Resolve one figure lfn to its SVG text. */
  figureSvg?: (lfn: string) => Promise<string>;
}

export function renderPosterView(
  poster: PosterWire,
  options: PosterViewOptions = {},
): HTMLElement {
  const sections = POSTER_SECTIONS.map((section) =>
    el(
      "section",
      { class: "poster-section", "data-section": section },
      el("h3", {}, SECTION_TITLES[section]),
      el("p", {}, poster[section]),
    ),
  );
  const figures = el("div", { class: "poster-figures" });
  for (const lfn of poster.figures) {
    const slot = el("figure", { "data-figure": lfn }, el("figcaption", {}, lfn));
    figures.appendChild(slot);
    options
      .figureSvg?.(lfn)
      .then((svg) => {
        const holder = el("div", { class: "figure" });
        holder.innerHTML = svg;
        slot.prepend(holder);
      })
      .catch(() => {
        slot.prepend(el("div", { class: "figure-missing" }, "figure unavailable"));
      });
  }
  return el(
    "article",
    { class: "poster-view", "data-poster": poster.poster_id },
    el("h2", { class: "poster-title" }, poster.title),
    el("div", { class: "poster-authors" }, poster.authors.join(", ")),
    ...sections,
    figures,
  );
}
