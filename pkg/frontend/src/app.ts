/** Page composition and the hash router.
 *
 * Views hang off the location hash so every screen is addressable:
 * #/data?q=...&page=2 reruns that exact search, #/analysis/<id> re-opens a
 * result (polling it back to life if it is still running), #/posters/<id>
 * shows a published poster. Navigation tears the old view down first,
 * which cancels any poll loop it had in flight.
 */

import { ApiClient, ApiFailure } from "./api";
import { renderAnalysisForm } from "./components/analysisForm";
import { renderCommentThread } from "./components/commentThread";
import { renderDatasetTable, renderQueryError } from "./components/datasetTable";
import { renderLogbookEntry, renderLogbookPanel } from "./components/logbookPanel";
import {
  renderAnalysisFailure,
  renderAnalysisWait,
  renderPlotView,
} from "./components/plotView";
import {
  emptyPosterDraft,
  posterRequestBody,
  renderPosterEditor,
  renderPosterView,
  type PosterDraft,
} from "./components/posterEditor";
import { el, mount } from "./render";
import { SessionState } from "./session";
import {
  metadataValue,
  type AnalysisWire,
  type LogbookEntryWire,
  type StudySchemasWire,
} from "./wire";

export interface Route {
  view: string;
  arg: string;
  params: URLSearchParams;
}

export function parseHash(hash: string): Route {
  const raw = hash.replace(/^#\/?/, "");
  const [pathPart, queryPart = ""] = raw.split("?", 2);
  const segments = pathPart.split("/").filter((s) => s.length > 0);
  return {
    view: segments[0] ?? "data",
    arg: segments.slice(1).join("/"),
    params: new URLSearchParams(queryPart),
  };
}

export function formatDataHash(q: string, page: number): string {
  const params = new URLSearchParams();
  if (q) params.set("q", q);
  if (page > 1) params.set("page", String(page));
  const suffix = params.toString();
  return "#/data" + (suffix ? `?${suffix}` : "");
}

const POLL_MS = 400;

export class App {
  readonly session = new SessionState();
  private schemas: StudySchemasWire | null = null;
  private savedFigures: string[] = [];
  private disposeView: (() => void) | null = null;
  private studyDraft = "lifetime";

  constructor(
    readonly api: ApiClient,
    readonly host: HTMLElement,
  ) {}

  start(): void {
    this.session.restore();
    window.addEventListener("hashchange", () => void this.renderRoute());
    void this.renderRoute();
  }

  navigate(hash: string): void {
    if (window.location.hash === hash) void this.renderRoute();
    else window.location.hash = hash;
  }

  async renderRoute(): Promise<void> {
    this.disposeView?.();
    this.disposeView = null;
    const route = parseHash(window.location.hash);
    if (!this.session.authenticated && route.view !== "login") {
      this.renderLogin();
      return;
    }
    try {
      switch (route.view) {
        case "login":
          this.renderLogin();
          return;
        case "data":
          await this.renderData(route.params.get("q") ?? "", this.pageOf(route.params));
          return;
        case "analyze":
          await this.renderAnalyze();
          return;
        case "analysis":
          await this.renderAnalysis(route.arg);
          return;
        case "poster":
          await this.renderPosterEditor();
          return;
        case "posters":
          await this.renderPoster(route.arg);
          return;
        case "logbook":
          await this.renderLogbook();
          return;
        default:
          this.navigate("#/data");
          return;
      }
    } catch (failure) {
      if (failure instanceof ApiFailure && failure.status === 401) {
        this.session.signOut();
        this.renderLogin();
        return;
      }
      this.renderError(failure);
    }
  }

  private pageOf(params: URLSearchParams): number {
    const n = Number(params.get("page") ?? "1");
    return Number.isInteger(n) && n >= 1 ? n : 1;
  }

  private chrome(title: string, body: HTMLElement): void {
    const group = this.session.group;
    const navLink = (hash: string, label: string) => {
      const a = el("a", { href: hash, class: "nav-link" }, label);
      return a;
    };
    const signOut = el("button", { type: "button", class: "sign-out" }, "sign out");
    signOut.addEventListener("click", async () => {
      try {
        await this.api.logout();
      } finally {
        this.session.signOut();
        this.navigate("#/login");
      }
    });
    const nav = group
      ? el(
          "nav",
          { class: "top-nav" },
          navLink("#/data", "data"),
          navLink("#/analyze", "analyze"),
          navLink("#/poster/new", "poster"),
          navLink("#/logbook", "logbook"),
          el("span", { class: "who" }, `${group.name} (${group.role})`),
          signOut,
        )
      : el("nav", { class: "top-nav" });
    mount(
      this.host,
      el("header", {}, el("h1", {}, "Cosmic ray e-lab"), nav),
      el("h2", { class: "view-title" }, title),
      el("main", {}, body),
    );
  }

  private renderError(failure: unknown): void {
    const message =
      failure instanceof ApiFailure
        ? `${failure.status}: ${failure.payload.error}`
        : String(failure);
    this.chrome("Something went wrong", el("div", { class: "page-error", role: "alert" }, message));
  }

  // -- login ----------------------------------------------------------------

  private renderLogin(): void {
    const name = el("input", { type: "text", "data-field": "name", placeholder: "group name" });
    const school = el("input", { type: "text", "data-field": "school", placeholder: "school" });
    const password = el("input", { type: "password", "data-field": "password" });
    const error = el("div", { class: "form-error", role: "alert" });
    const submit = el("button", { type: "submit" }, "Sign in");
    const form = el(
      "form",
      { class: "login-form" },
      name,
      school,
      password,
      submit,
      error,
    );
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      error.textContent = "";
      try {
        const { group } = await this.api.login(name.value, school.value, password.value);
        this.session.signIn(group);
        this.navigate("#/data");
      } catch (failure) {
        error.textContent =
          failure instanceof ApiFailure ? failure.payload.error : String(failure);
      }
    });
    this.chrome("Sign in", form);
  }

  // -- data search ----------------------------------------------------------

  private async renderData(q: string, page: number): Promise<void> {
    const box = el("input", { type: "search", class: "query-box", value: q });
    box.value = q;
    const go = el("button", { type: "submit" }, "Search");
    const searchForm = el("form", { class: "search-form" }, box, go);
    searchForm.addEventListener("submit", (event) => {
      event.preventDefault();
      this.navigate(formatDataHash(box.value, 1));
    });
    const results = el("div", { class: "results" });
    const selectionNote = el("div", { class: "selection-note" });
    const refreshNote = () => {
      const n = this.session.selections.size;
      mount(
        selectionNote,
        `${n} selected`,
        ...(n > 0 ? [" • ", el("a", { href: "#/analyze" }, "analyze selection")] : []),
      );
    };
    refreshNote();

    try {
      const pageWire = await this.api.searchData(q, page);
      mount(
        results,
        renderDatasetTable(pageWire, {
          isSelected: (lfn) => this.session.isSelected(lfn),
          onToggle: (row, on) => {
            this.session.toggleSelection(
              {
                lfn: row.name,
                detector: metadataValue(row, "detector"),
                school: metadataValue(row, "school"),
              },
              on,
            );
            refreshNote();
          },
          onPage: (next) => this.navigate(formatDataHash(q, next)),
        }),
      );
    } catch (failure) {
      if (failure instanceof ApiFailure && failure.status === 400) {
        mount(results, renderQueryError(q, failure.payload.error, failure.payload.position));
      } else {
        throw failure;
      }
    }
    this.chrome("Data search", el("div", {}, searchForm, selectionNote, results));
  }

  // -- analysis form and result ---------------------------------------------

  private async loadSchemas(): Promise<StudySchemasWire> {
    if (!this.schemas) this.schemas = await this.api.studySchemas();
    return this.schemas;
  }

  private async renderAnalyze(): Promise<void> {
    const schemas = await this.loadSchemas();
    const study = this.studyDraft in schemas ? this.studyDraft : Object.keys(schemas)[0];
    const draft = this.session.drafts.get(study) ?? {};
    const handle = renderAnalysisForm(schemas, study, {
      selectedLfns: this.session.selectedLfns(),
      draft,
      onStudyChange: (next) => {
        this.studyDraft = next;
        void this.renderAnalyze();
      },
      onDraftChange: (field, text) => {
        const d = this.session.drafts.get(study) ?? {};
        d[field] = text;
        this.session.drafts.set(study, d);
      },
      onSubmit: async (chosenStudy, inputs, params) => {
        try {
          const analysis = await this.api.submitAnalysis(chosenStudy, inputs, params);
          this.navigate(`#/analysis/${analysis.analysis_id}`);
        } catch (failure) {
          if (failure instanceof ApiFailure && failure.payload.errors) {
            handle.showErrors(failure.payload.errors);
          } else if (failure instanceof ApiFailure) {
            handle.showRequestError(failure.payload.error);
          } else {
            throw failure;
          }
        }
      },
    });
    this.chrome("Run an analysis", handle.root);
  }

  private async renderAnalysis(analysisId: string): Promise<void> {
    let cancelled = false;
    this.disposeView = () => {
      cancelled = true;
    };
    const body = el("div", { class: "analysis-host" });
    this.chrome("Analysis", body);

    const step = async (): Promise<void> => {
      const analysis = await this.api.getAnalysis(analysisId);
      if (cancelled) return;
      if (analysis.status === "pending" || analysis.status === "running") {
        mount(body, renderAnalysisWait(analysis));
        window.setTimeout(() => {
          if (!cancelled) void step().catch((f) => this.renderError(f));
        }, POLL_MS);
        return;
      }
      if (analysis.status === "failed") {
        mount(body, renderAnalysisFailure(analysis));
        return;
      }
      await this.renderFinished(analysis, body);
    };
    await step();
  }

  private async renderFinished(analysis: AnalysisWire, body: HTMLElement): Promise<void> {
    const plotLfn = analysis.outputs["plot"];
    const svgText = plotLfn ? await this.api.plotText(plotLfn) : "";
    const fit = analysis.outputs["fit"]
      ? await this.api.plotJson<import("./wire").FitWire>(analysis.outputs["fit"])
      : null;
    const saved = el("div", { class: "save-note" });
    const view = renderPlotView(analysis, svgText, fit, {
      onToggleDag: plotLfn ? () => this.api.dagText(plotLfn) : undefined,
      onSave: plotLfn
        ? async (caption) => {
            const metadata = caption
              ? [
                  {
                    attribute_name: "caption",
                    value_type: "string",
                    values: [caption],
                  },
                ]
              : [];
            const result = await this.api.savePlot(plotLfn, metadata);
            this.savedFigures.push(plotLfn, result.dag_lfn);
            mount(saved, `saved; workflow figure ${result.dag_lfn}`);
          }
        : undefined,
    });
    // Comments hang off a catalog object; the plot when there is one,
    // otherwise the study's primary table (shower has no plot).
    const target = plotLfn ?? Object.values(analysis.outputs)[0];
    const pieces: HTMLElement[] = [view, saved];
    if (target) {
      pieces.push(
        renderCommentThread(await this.api.listComments(target), {
          onPost: async (text) => {
            await this.api.addComment(target, text);
            return this.api.listComments(target);
          },
        }),
      );
    }
    mount(body, ...pieces);
  }

  // -- posters --------------------------------------------------------------

  private async renderPosterEditor(): Promise<void> {
    const draft: PosterDraft = emptyPosterDraft();
    const editor = renderPosterEditor(draft, {
      availableFigures: [...new Set(this.savedFigures)],
      onPublish: async (finished) => {
        try {
          const poster = await this.api.createPoster(posterRequestBody(finished));
          this.navigate(`#/posters/${poster.poster_id}`);
        } catch (failure) {
          this.renderError(failure);
        }
      },
    });
    this.chrome("New poster", editor);
  }

  private async renderPoster(posterId: string): Promise<void> {
    const poster = await this.api.getPoster(posterId);
    const view = renderPosterView(poster, {
      figureSvg: (lfn) => this.api.plotText(lfn),
    });
    const thread = renderCommentThread(await this.api.listComments(poster.poster_id), {
      onPost: async (text) => {
        await this.api.addComment(poster.poster_id, text);
        return this.api.listComments(poster.poster_id);
      },
    });
    this.chrome("Poster", el("div", {}, view, thread));
  }

  // -- logbook --------------------------------------------------------------

  private async renderLogbook(): Promise<void> {
    const group = this.session.group;
    if (!group) return;
    const [{ milestones }, own] = await Promise.all([
      this.api.milestones(),
      this.api.readLogbookGroup(group.group_id),
    ]);
    const overviewHost = el("div", { class: "overview-host" });
    const rerender = () => void this.renderLogbook();
    const panel = renderLogbookPanel(own.entries, {
      role: group.role,
      milestones,
      onWrite: async (milestone, text) => {
        try {
          await this.api.writeLogbook(milestone, text);
          rerender();
        } catch (failure) {
          this.renderError(failure);
        }
      },
      onOverview:
        group.role === "teacher"
          ? async (milestone) => {
              const overview = await this.api.logbookOverview(milestone);
              mount(
                overviewHost,
                el(
                  "ol",
                  { class: "logbook-entries overview" },
                  ...overview.entries.map((e: LogbookEntryWire) =>
                    renderLogbookEntry(e, {
                      role: group.role,
                      onGrade: async (entryId, text) => {
                        await this.api.gradeEntry(entryId, text);
                        rerender();
                      },
                    }),
                  ),
                ),
              );
            }
          : undefined,
      onGrade:
        group.role === "teacher"
          ? async (entryId, text) => {
              await this.api.gradeEntry(entryId, text);
              rerender();
            }
          : undefined,
    });
    this.chrome("Logbook", el("div", {}, panel, overviewHost));
  }
}
