/** Comment thread under a poster, dataset, or plot.
 *
 * The list is the service payload in payload order (the service already
 * sorts by comment id, which is posting order), each entry rendered
 * verbatim. Submitting asks the service to append, then re-renders from a
 * fresh list rather than patching locally; the newest entry therefore
 * shows up last because the service says so, not because the client
 * assumed it.
 */

import { el, mount } from "../render";
import type { CommentListWire } from "../wire";

export interface CommentThreadOptions {
  onPost: (body: string) => Promise<CommentListWire>;
}

export function renderCommentList(list: CommentListWire): HTMLElement {
  const items = list.comments.map((c) =>
    el(
      "li",
      { class: "comment", "data-comment": c.comment_id },
      el("span", { class: "comment-author" }, c.author),
      el("span", { class: "comment-date" }, c.created_at),
      el("div", { class: "comment-body" }, c.body),
    ),
  );
  if (items.length === 0) {
    return el("div", { class: "comment-list empty-state" }, "No comments yet.");
  }
  return el("ol", { class: "comment-list" }, ...items);
}

export function renderCommentThread(
  list: CommentListWire,
  options: CommentThreadOptions,
): HTMLElement {
  const listHost = el("div", { class: "comment-host" }, renderCommentList(list));
  const input = el("textarea", { class: "comment-input", rows: "3" });
  const error = el("span", { class: "comment-error", role: "alert" });
  const post = el("button", { type: "submit" }, "Post comment");
  const form = el("form", { class: "comment-form" }, input, post, error);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    error.textContent = "";
    try {
      const fresh = await options.onPost(input.value);
      input.value = "";
      mount(listHost, renderCommentList(fresh));
    } catch (failure) {
      error.textContent = failure instanceof Error ? failure.message : String(failure);
    }
  });
  return el("div", { class: "comment-thread", "data-target": list.target }, listHost, form);
}
