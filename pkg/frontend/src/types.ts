export interface PrototypeItem {
  prototype_id: number;
  class_code: string;
  kind: string;
  render_url: string;
}

export interface PrototypesPage {
  version: number;
  page: number;
  page_size: number;
  total: number;
  items: PrototypeItem[];
}

export interface RatingSubmission {
  reviewer_id: string;
  prototype_id: number;
  representativeness: number | null;
  clarity: number | null;
  excluded: boolean;
}

export interface SummaryRow {
  reviewer: string;
  criterion: string;
  n: number;
  mean: number;
  ci: [number, number];
}

export interface SummaryResponse {
  version: number;
  rows: SummaryRow[];
}

/** A queued delivery: either a rating or an exclusion event. */
export interface PendingSubmission {
  kind: "rating" | "exclude";
  reviewer_id: string;
  prototype_id: number;
  representativeness?: number;
  clarity?: number;
  excluded?: boolean;
}
