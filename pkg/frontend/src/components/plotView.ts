/** Finished-analysis view: the rendered figure, its numbers, and the DAG.
 *
 * The figure arrives as SVG text from the plots endpoint and is inlined
 * untouched. The legend repeats the fit payload digit for digit (String()
 * on the payload number, no rounding); the science happened on the server
 * and this view must not add any of its own. A toggle swaps the figure for
 * the provenance DAG, drawn client-side from DOT.
 */

import { renderDag } from "../dot";
import { el, mount } from "../render";
import type { AnalysisWire, FitWire } from "../wire";

export interface PlotViewOptions {
  onToggleDag?: () => Promise<string>;
  onSave?: (caption: string) => void;
}

/** tau +/- sigma line, byte-equal to the fit payload fields. */
export function renderLegend(fit: FitWire): HTMLElement {
  const span = (name: keyof FitWire) =>
    el("span", { "data-fit": name }, String(fit[name]));
  return el(
    "div",
    { class: "fit-legend" },
    el(
      "div",
      { class: "legend-tau" },
      "τ = ",
      span("tau_us"),
      " ± ",
      span("sigma_tau_us"),
      " µs",
    ),
    el(
      "div",
      { class: "legend-detail" },
      "candidates ",
      span("n_candidates"),
      ", χ²/ndf ",
      span("chi2"),
      "/",
      span("ndf"),
      fit.converged ? "" : " (fit did not converge)",
    ),
  );
}

export function renderPlotView(
  analysis: AnalysisWire,
  svgText: string,
  fit: FitWire | null,
  options: PlotViewOptions = {},
): HTMLElement {
  const figure = el("div", { class: "figure" });
  figure.innerHTML = svgText;
  const stage = el("div", { class: "plot-stage" }, figure);

  const header = el(
    "div",
    { class: "plot-header" },
    el("span", { class: "plot-study" }, analysis.study),
    " — ",
    el("span", { class: "plot-status", "data-status": analysis.status }, analysis.status),
  );

  const root = el("div", { class: "plot-view", "data-analysis": analysis.analysis_id }, header);
  if (fit) root.appendChild(renderLegend(fit));
  root.appendChild(stage);

  if (options.onToggleDag && analysis.dag_available) {
    const toggle = el("button", { type: "button", class: "dag-toggle" }, "Show workflow DAG");
    let showingDag = false;
    toggle.addEventListener("click", async () => {
      if (showingDag) {
        mount(stage, figure);
        toggle.textContent = "Show workflow DAG";
        showingDag = false;
        return;
      }
      const dotText = await options.onToggleDag?.();
      if (dotText === undefined) return;
      mount(stage, renderDag(dotText));
      toggle.textContent = "Show figure";
      showingDag = true;
    });
    root.appendChild(toggle);
  }

  if (options.onSave) {
    const caption = el("input", {
      type: "text",
      class: "caption-input",
      placeholder: "caption for the saved figure",
    });
    const save = el("button", { type: "button", class: "save-plot" }, "Save figure");
    save.addEventListener("click", () => options.onSave?.(caption.value));
    root.appendChild(el("div", { class: "save-row" }, caption, save));
  }
  return root;
}

/** Waiting view shown while an analysis is pending or running. */
export function renderAnalysisWait(analysis: AnalysisWire): HTMLElement {
  return el(
    "div",
    { class: "plot-view waiting", "data-analysis": analysis.analysis_id },
    el("div", { class: "spinner" }),
    el(
      "div",
      { class: "wait-note", "data-status": analysis.status },
      `${analysis.study} analysis ${analysis.status}…`,
    ),
  );
}

/** Terminal view for an analysis that ended in failure. */
export function renderAnalysisFailure(analysis: AnalysisWire): HTMLElement {
  return el(
    "div",
    { class: "plot-view failed", "data-analysis": analysis.analysis_id },
    el("div", { class: "failure-title" }, `${analysis.study} analysis failed`),
    el("div", { class: "failure-detail" }, analysis.detail),
  );
}
