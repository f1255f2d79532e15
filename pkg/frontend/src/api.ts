/** Thin typed client for the portal's HTTP API.
 *
 * In the browser the session rides on the elab_session cookie, which the
 * browser attaches by itself for same-origin requests. Under node (tests,
 * capture scripts) there is no cookie jar, so the client keeps the one
 * session cookie it has seen and replays it; response.headers.get("set-cookie")
 * is readable there and null in browsers, which makes the same code path
 * safe in both.
 */

import type {
  AnalysisWire,
  CommentListWire,
  CommentWire,
  ContentListWire,
  ContentWire,
  ErrorWire,
  GroupWire,
  LogbookEntryWire,
  MetadataTupleWire,
  MilestoneWire,
  PosterWire,
  SavePlotWire,
  SearchPageWire,
  StudySchemasWire,
} from "./wire";

export class ApiFailure extends Error {
  constructor(
    public status: number,
    public payload: ErrorWire,
  ) {
    super(payload.error ?? `request failed with ${status}`);
  }
}

type Method = "GET" | "POST" | "PUT" | "DELETE";

export class ApiClient {
  private cookie: string | null = null;

  constructor(private base: string = "") {}

  private async request(method: Method, path: string, body?: unknown): Promise<Response> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.cookie) headers["Cookie"] = this.cookie;
    const response = await fetch(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
      credentials: "same-origin",
    });
    const setCookie = response.headers.get("set-cookie");
    if (setCookie) {
      this.cookie = setCookie.split(";")[0];
    }
    return response;
  }

  private async json<T>(method: Method, path: string, body?: unknown): Promise<T> {
    const response = await this.request(method, path, body);
    const data = await response.json();
    if (!response.ok) throw new ApiFailure(response.status, data as ErrorWire);
    return data as T;
  }

  // -- accounts and sessions ------------------------------------------------

  register(body: {
    name: string;
    password: string;
    role: string;
    school: string;
    city?: string;
    state?: string;
    teacher_id?: string;
  }): Promise<{ group: GroupWire }> {
    return this.json("POST", "/api/groups", body);
  }

  login(name: string, school: string, password: string): Promise<{ group: GroupWire }> {
    return this.json("POST", "/api/session", { name, school, password });
  }

  logout(): Promise<{ ended: boolean }> {
    return this.json("DELETE", "/api/session");
  }

  // -- data -----------------------------------------------------------------

  upload(contentBase64: string, metadata: MetadataTupleWire[] = []): Promise<CatalogUpload> {
    return this.json("POST", "/api/data", { content: contentBase64, metadata });
  }

  searchData(q: string, page: number): Promise<SearchPageWire> {
    const params = new URLSearchParams();
    if (q) params.set("q", q);
    if (page > 1) params.set("page", String(page));
    const suffix = params.toString();
    return this.json("GET", "/api/data" + (suffix ? `?${suffix}` : ""));
  }

  // -- analyses -------------------------------------------------------------

  studySchemas(): Promise<StudySchemasWire> {
    return this.json("GET", "/api/studies");
  }

  submitAnalysis(
    study: string,
    inputs: string[],
    params: Record<string, unknown>,
  ): Promise<AnalysisWire> {
    return this.json("POST", "/api/analyses", { study, inputs, params });
  }

  getAnalysis(analysisId: string): Promise<AnalysisWire> {
    return this.json("GET", `/api/analyses/${analysisId}`);
  }

  // -- plots and provenance -------------------------------------------------

  async plotText(lfn: string): Promise<string> {
    const response = await this.request("GET", `/api/plots/${lfn}`);
    if (!response.ok) throw new ApiFailure(response.status, await response.json());
    return response.text();
  }

  async plotJson<T>(lfn: string): Promise<T> {
    return JSON.parse(await this.plotText(lfn)) as T;
  }

  async dagText(lfn: string): Promise<string> {
    const response = await this.request("GET", `/api/dag/${lfn}`);
    if (!response.ok) throw new ApiFailure(response.status, await response.json());
    return response.text();
  }

  savePlot(lfn: string, metadata: MetadataTupleWire[]): Promise<SavePlotWire> {
    return this.json("POST", `/api/plots/${lfn}/metadata`, { metadata });
  }

  // -- posters and comments -------------------------------------------------

  createPoster(body: {
    title: string;
    authors?: string[];
    abstract?: string;
    procedures?: string;
    results?: string;
    discussion_conclusions?: string;
    figures?: string[];
  }): Promise<PosterWire> {
    return this.json("POST", "/api/posters", body);
  }

  getPoster(posterId: string): Promise<PosterWire> {
    return this.json("GET", `/api/posters/${posterId}`);
  }

  addComment(target: string, body: string): Promise<CommentWire> {
    return this.json("POST", "/api/comments", { target, body });
  }

  listComments(target: string): Promise<CommentListWire> {
    return this.json("GET", `/api/comments?target=${encodeURIComponent(target)}`);
  }

  // -- content --------------------------------------------------------------

  getContent(kind: "glossary" | "reference", name: string): Promise<ContentWire> {
    return this.json("GET", `/api/content/${kind}/${encodeURIComponent(name)}`);
  }

  listContent(kind: "glossary" | "reference"): Promise<ContentListWire> {
    return this.json("GET", `/api/content/${kind}`);
  }

  putContent(
    kind: "glossary" | "reference",
    name: string,
    body: string,
    description = "",
  ): Promise<ContentWire> {
    return this.json("PUT", `/api/content/${kind}/${encodeURIComponent(name)}`, {
      body,
      description,
    });
  }

  // -- logbook --------------------------------------------------------------

  milestones(): Promise<{ milestones: MilestoneWire[] }> {
    return this.json("GET", "/api/milestones");
  }

  writeLogbook(milestone: string, body: string): Promise<LogbookEntryWire> {
    return this.json("POST", "/api/logbook", { milestone, body });
  }

  readLogbookGroup(groupId: string): Promise<{ group: string; entries: LogbookEntryWire[] }> {
    return this.json("GET", `/api/logbook?group=${encodeURIComponent(groupId)}`);
  }

  logbookOverview(
    milestone: string,
  ): Promise<{ milestone: string; entries: LogbookEntryWire[] }> {
    return this.json("GET", `/api/logbook?milestone=${encodeURIComponent(milestone)}`);
  }

  gradeEntry(entryId: string, body: string): Promise<LogbookEntryWire> {
    return this.json("POST", `/api/logbook/${entryId}/comment`, { body });
  }
}

export interface CatalogUpload {
  lfn: string;
  object_id: string;
  metadata: MetadataTupleWire[];
}
