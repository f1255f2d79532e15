/** Pop-up help: glossary entries and field annotations.
 *
 * Glossary text is fetched the first time a term is opened and cached for
 * the rest of the session. Field annotations already travel with the study
 * schema, so those pop up without a request at all.
 */

import { ApiClient, ApiFailure } from "./api";
import { el } from "./render";

const cache = new Map<string, string>();

export function resetGlossaryCache(): void {
  cache.clear();
}

async function lookup(api: ApiClient, term: string): Promise<string> {
  const hit = cache.get(term);
  if (hit !== undefined) return hit;
  let text: string;
  try {
    const entry = await api.getContent("glossary", term);
    text = entry.body;
  } catch (failure) {
    if (failure instanceof ApiFailure && failure.status === 404) {
      text = "No glossary entry yet for this term.";
    } else {
      throw failure;
    }
  }
  cache.set(term, text);
  return text;
}

function showPopup(anchor: HTMLElement, title: string, body: string): void {
  document.querySelectorAll(".popup").forEach((p) => p.remove());
  const close = el("button", { class: "popup-close", type: "button" }, "×");
  const popup = el(
    "div",
    { class: "popup", role: "dialog" },
    el("div", { class: "popup-title" }, title, close),
    el("div", { class: "popup-body" }, body),
  );
  close.addEventListener("click", () => popup.remove());
  anchor.insertAdjacentElement("afterend", popup);
}

/** A "?" link that pops the glossary entry for `term` on click. */
export function glossaryLink(api: ApiClient, term: string): HTMLElement {
  const link = el("a", { class: "help-link", href: "#", "data-term": term }, "?");
  link.addEventListener("click", async (event) => {
    event.preventDefault();
    const body = await lookup(api, term);
    showPopup(link, term, body);
  });
  return link;
}

/** A "?" link for a form field whose help text is already in hand. */
export function annotationLink(field: string, doc: string): HTMLElement {
  const link = el("a", { class: "help-link", href: "#", "data-help-for": field }, "?");
  link.addEventListener("click", (event) => {
    event.preventDefault();
    showPopup(link, field, doc);
  });
  return link;
}
