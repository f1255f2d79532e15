/** Payload-vs-DOM oracles over captured portal responses.
 *
 * Each component renders a recorded payload and the test reads the DOM
 * back, expecting the payload's own bytes: no rounding, reordering, or
 * reformatting on the way to the screen. Numbers are checked against the
 * raw JSON tokens, not a reparsed copy.
 */

import { beforeEach, describe, expect, it } from "vitest";
import { renderAnalysisForm } from "../src/components/analysisForm";
import { renderCommentList, renderCommentThread } from "../src/components/commentThread";
import { renderDatasetTable, renderQueryError } from "../src/components/datasetTable";
import { renderLogbookEntry } from "../src/components/logbookPanel";
import { renderLegend } from "../src/components/plotView";
import { renderPosterView } from "../src/components/posterEditor";
import { SessionState } from "../src/session";
import { metadataValue } from "../src/wire";
import type {
  CommentListWire,
  ErrorWire,
  FitWire,
  LogbookEntryWire,
  PosterWire,
  SearchPageWire,
  StudySchemasWire,
} from "../src/wire";
import { fixtureJson, fixtureText, rawJsonToken } from "./helpers";

const noopTable = {
  isSelected: () => false,
  onToggle: () => {},
  onPage: () => {},
};

beforeEach(() => {
  window.sessionStorage.clear();
  document.body.innerHTML = "";
});

describe("dataset table", () => {
  const page1 = fixtureJson<SearchPageWire>("search_page1.json");
  const page2 = fixtureJson<SearchPageWire>("search_page2.json");

  it("renders one row per payload item with the payload's values", () => {
    const table = renderDatasetTable(page1, noopTable);
    const rows = table.querySelectorAll("tbody tr");
    expect(rows.length).toBe(page1.items.length);
    page1.items.forEach((item, i) => {
      for (const attribute of ["name", "school", "date", "pulse_count"]) {
        const cell = rows[i].querySelector(`td[data-attribute="${attribute}"]`);
        expect(cell?.textContent).toBe(metadataValue(item, attribute));
      }
    });
  });

  it("shows pulse counts byte-equal to the payload integers", () => {
    const text = fixtureText("search_page1.json");
    const table = renderDatasetTable(page1, noopTable);
    const cells = [...table.querySelectorAll('td[data-attribute="pulse_count"]')];
    const tokens = [...text.matchAll(/"pulse_count"[^\]]*?\[\s*(\d+)/g)].map((m) => m[1]);
    expect(cells.map((c) => c.textContent)).toEqual(tokens.slice(0, cells.length));
  });

  it("keeps a selection alive across pages", () => {
    const session = new SessionState();
    const options = {
      isSelected: (lfn: string) => session.isSelected(lfn),
      onToggle: (row: SearchPageWire["items"][number], on: boolean) =>
        session.toggleSelection({ lfn: row.name, detector: "", school: "" }, on),
      onPage: () => {},
    };
    // change events only fire for connected elements, so mount each render
    const host = document.createElement("div");
    document.body.appendChild(host);
    try {
      host.replaceChildren(renderDatasetTable(page1, options));
      host.querySelector<HTMLInputElement>("tbody input[type=checkbox]")?.click();
      host.replaceChildren(renderDatasetTable(page2, options));
      host.querySelector<HTMLInputElement>("tbody input[type=checkbox]")?.click();
      expect(session.selections.size).toBe(2);

      host.replaceChildren(renderDatasetTable(page1, options));
      const boxAgain = host.querySelector<HTMLInputElement>("tbody input[type=checkbox]");
      expect(boxAgain?.checked).toBe(true);
    } finally {
      host.remove();
    }
  });

  it("renders the empty state for a result with no items", () => {
    const empty: SearchPageWire = {
      query: 'detector = "none"',
      page: 1,
      page_size: 5,
      total: 0,
      pages: 1,
      items: [],
    };
    const table = renderDatasetTable(empty, noopTable);
    expect(table.classList.contains("empty-state")).toBe(true);
    expect(table.textContent).toContain("No data files");
  });

  it("disables prev on the first page and next on the last", () => {
    const first = renderDatasetTable(page1, noopTable);
    expect(first.querySelector<HTMLButtonElement>(".page-prev")?.disabled).toBe(true);
    const last = renderDatasetTable({ ...page2, page: page2.pages }, noopTable);
    expect(last.querySelector<HTMLButtonElement>(".page-next")?.disabled).toBe(true);
  });
});

describe("query error", () => {
  it("repeats the service message and points at the position", () => {
    const failure = fixtureJson<ErrorWire>("search_error.json");
    const box = renderQueryError("detector ~ 3", failure.error, failure.position);
    expect(box.querySelector(".query-error-message")?.textContent).toBe(failure.error);
    const caretLine = box.querySelector("pre")?.textContent?.split("\n")[1] ?? "";
    expect(caretLine.indexOf("^")).toBe(failure.position);
  });
});

describe("fit legend", () => {
  it("prints tau and sigma byte-equal to the fit payload", () => {
    const text = fixtureText("fit.json");
    const legend = renderLegend(JSON.parse(text) as FitWire);
    const shown = (name: string) =>
      legend.querySelector(`[data-fit="${name}"]`)?.textContent;
    expect(shown("tau_us")).toBe(rawJsonToken(text, "tau_us"));
    expect(shown("sigma_tau_us")).toBe(rawJsonToken(text, "sigma_tau_us"));
    expect(shown("chi2")).toBe(rawJsonToken(text, "chi2"));
    expect(shown("ndf")).toBe(rawJsonToken(text, "ndf"));
    expect(shown("n_candidates")).toBe(rawJsonToken(text, "n_candidates"));
  });
});

describe("comment thread", () => {
  const list = fixtureJson<CommentListWire>("comments.json");

  it("renders every comment in payload order, verbatim", () => {
    const thread = renderCommentList(list);
    const items = [...thread.querySelectorAll("li.comment")];
    expect(items.length).toBe(list.comments.length);
    list.comments.forEach((c, i) => {
      expect(items[i].getAttribute("data-comment")).toBe(c.comment_id);
      expect(items[i].querySelector(".comment-author")?.textContent).toBe(c.author);
      expect(items[i].querySelector(".comment-date")?.textContent).toBe(c.created_at);
      expect(items[i].querySelector(".comment-body")?.textContent).toBe(c.body);
    });
  });

  it("re-renders from the refreshed list after posting", async () => {
    const extended: CommentListWire = {
      target: list.target,
      comments: [
        ...list.comments,
        { comment_id: "comment_000099", author: "Gamma Crew", created_at: "x", body: "newest" },
      ],
    };
    const thread = renderCommentThread(list, { onPost: async () => extended });
    document.body.appendChild(thread);
    const box = thread.querySelector("textarea") as HTMLTextAreaElement;
    box.value = "newest";
    thread.querySelector("form")?.dispatchEvent(new Event("submit", { cancelable: true }));
    await Promise.resolve();
    await Promise.resolve();
    const items = [...thread.querySelectorAll("li.comment")];
    expect(items.length).toBe(list.comments.length + 1);
    expect(items[items.length - 1].querySelector(".comment-body")?.textContent).toBe("newest");
  });
});

describe("poster view", () => {
  it("shows the four sections and authors from the payload", () => {
    const poster = fixtureJson<PosterWire>("poster.json");
    const view = renderPosterView(poster);
    expect(view.querySelector(".poster-title")?.textContent).toBe(poster.title);
    expect(view.querySelector(".poster-authors")?.textContent).toBe(poster.authors.join(", "));
    for (const section of [
      "abstract",
      "procedures",
      "results",
      "discussion_conclusions",
    ] as const) {
      const p = view.querySelector(`[data-section="${section}"] p`);
      expect(p?.textContent).toBe(poster[section]);
    }
  });
});

describe("logbook entry", () => {
  it("renders body, milestone title, and the teacher's comment", () => {
    const { entries } = fixtureJson<{ group: string; entries: LogbookEntryWire[] }>(
      "logbook.json",
    );
    const graded = entries.find((e) => e.teacher_comment);
    expect(graded).toBeDefined();
    const item = renderLogbookEntry(graded as LogbookEntryWire, { role: "student" });
    expect(item.querySelector(".entry-body")?.textContent).toBe(graded?.body);
    expect(item.querySelector(".entry-milestone")?.textContent).toBe(graded?.milestone_title);
    expect(item.querySelector(".teacher-comment")?.textContent).toBe(graded?.teacher_comment);
  });
});

describe("analysis form", () => {
  const schemas = fixtureJson<StudySchemasWire>("studies.json");

  it("renders a help affordance for every annotated field", () => {
    for (const study of Object.keys(schemas)) {
      const handle = renderAnalysisForm(schemas, study, {
        selectedLfns: ["a.data", "b.data"],
        draft: {},
        onStudyChange: () => {},
        onDraftChange: () => {},
        onSubmit: () => {},
      });
      for (const field of schemas[study].params) {
        const help = handle.root.querySelector(`[data-help-for="${field.name}"]`);
        if (field.doc) expect(help, `${study}.${field.name}`).not.toBeNull();
        else expect(help, `${study}.${field.name}`).toBeNull();
      }
    }
  });

  it("flags both bounds inline and submits nothing when fit_min >= fit_max", () => {
    let submitted = false;
    const handle = renderAnalysisForm(schemas, "lifetime", {
      selectedLfns: ["a.data"],
      draft: { fit_min_us: "5.5", fit_max_us: "1.5" },
      onStudyChange: () => {},
      onDraftChange: () => {},
      onSubmit: () => {
        submitted = true;
      },
    });
    document.body.appendChild(handle.root);
    handle.root.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(submitted).toBe(false);
    expect(
      handle.root.querySelector('[data-error-for="fit_min_us"]')?.textContent,
    ).toBe("must be below fit_max_us");
    expect(
      handle.root.querySelector('[data-error-for="fit_max_us"]')?.textContent,
    ).toBe("must be above fit_min_us");
  });

  it("submits the typed overrides once the mirror is satisfied", () => {
    let got: { study: string; inputs: string[]; params: Record<string, unknown> } | null = null;
    const handle = renderAnalysisForm(schemas, "lifetime", {
      selectedLfns: ["a.data"],
      draft: { bins: "42", title: "our run" },
      onStudyChange: () => {},
      onDraftChange: () => {},
      onSubmit: (study, inputs, params) => {
        got = { study, inputs, params };
      },
    });
    document.body.appendChild(handle.root);
    handle.root.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(got).toEqual({
      study: "lifetime",
      inputs: ["a.data"],
      params: { bins: 42, title: "our run" },
    });
  });
});
