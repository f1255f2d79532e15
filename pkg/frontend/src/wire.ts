/** Shapes of the JSON bodies the portal service sends and accepts.
 *
 * These mirror the service exactly; nothing here is computed client-side.
 * Numbers stay numbers: views render them with String() so the text on
 * screen is the payload value, never a reformatted copy.
 */

export type Role = "student" | "teacher" | "admin";

export interface GroupWire {
  group_id: string;
  name: string;
  school: string;
  city: string;
  state: string;
  role: Role;
  teacher_id: string | null;
}

export interface MetadataTupleWire {
  attribute_name: string;
  value_type: string;
  values: (string | number | boolean)[];
}

export interface CatalogObjectWire {
  object_id: string;
  kind: string;
  name: string;
  payload: string;
  metadata: MetadataTupleWire[];
}

export interface SearchPageWire {
  query: string;
  page: number;
  page_size: number;
  total: number;
  pages: number;
  items: CatalogObjectWire[];
}

export interface StudyFieldWire {
  name: string;
  type: "integer" | "float" | "boolean" | "string";
  default: number | boolean | string | null;
  doc: string;
}

export interface StudySchemaWire {
  inputs: "one" | "many";
  params: StudyFieldWire[];
}

export type StudySchemasWire = Record<string, StudySchemaWire>;

export type AnalysisStatus = "pending" | "running" | "succeeded" | "failed";

export interface AnalysisWire {
  analysis_id: string;
  group_id: string;
  study: string;
  status: AnalysisStatus;
  inputs: string[];
  params: Record<string, number | boolean | string>;
  detail: string;
  outputs: Record<string, string>;
  dag_available: boolean;
  created_at: number;
  finished_at: number | null;
}

export interface FitWire {
  A: number;
  tau_us: number;
  B: number;
  sigma_A: number;
  sigma_tau_us: number;
  sigma_B: number;
  chi2: number;
  ndf: number;
  n_candidates: number;
  converged: boolean;
}

export interface CommentWire {
  comment_id: string;
  target: string;
  author: string;
  created_at: string;
  body: string;
}

export interface CommentListWire {
  target: string;
  comments: Omit<CommentWire, "target">[];
}

export interface PosterWire {
  poster_id: string;
  title: string;
  authors: string[];
  abstract: string;
  procedures: string;
  results: string;
  discussion_conclusions: string;
  figures: string[];
  metadata: MetadataTupleWire[];
}

export interface ContentWire {
  kind: string;
  name: string;
  body: string;
  description: string;
  object_id: string;
}

export interface ContentListWire {
  kind: string;
  items: { name: string; description: string }[];
}

export interface MilestoneWire {
  id: string;
  title: string;
}

export interface LogbookEntryWire {
  entry_id: string;
  group_id: string;
  milestone: string;
  milestone_title: string;
  body: string;
  author_role: Role;
  created_at: string;
  teacher_comment: string | null;
}

export interface SavePlotWire {
  object: CatalogObjectWire;
  dag_lfn: string;
  dag_object_id: string;
}

/** Per-field problem inside an "invalid parameters" response. */
export interface FieldErrorWire {
  field: string;
  message: string;
  doc?: string;
}

export interface ErrorWire {
  error: string;
  field?: string;
  position?: number;
  errors?: FieldErrorWire[];
}

/** Pull one single-valued attribute out of a metadata list, or "" if absent. */
export function metadataValue(obj: CatalogObjectWire, attribute: string): string {
  for (const t of obj.metadata) {
    if (t.attribute_name === attribute && t.values.length > 0) {
      return String(t.values[0]);
    }
  }
  return "";
}
