import type {
  PendingSubmission,
  PrototypeItem,
  PrototypesPage,
  SummaryResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the review service HTTP+JSON API. */
export class ReviewClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw new Error(`GET ${path} -> ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  private async postJson(path: string, body: unknown): Promise<void> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new Error(`POST ${path} -> ${resp.status}`);
    }
  }

  listPrototypes(page: number, pageSize = 50): Promise<PrototypesPage> {
    return this.getJson(`/prototypes?page=${page}&page_size=${pageSize}`);
  }

  /** Walk pagination until every prototype is collected. */
  async fetchAllPrototypes(): Promise<PrototypeItem[]> {
    const items: PrototypeItem[] = [];
    let page = 0;
    for (;;) {
      const data = await this.listPrototypes(page);
      items.push(...data.items);
      if (items.length >= data.total || data.items.length === 0) {
        return items;
      }
      page += 1;
    }
  }

  renderUrl(item: PrototypeItem): string {
    return `${this.baseUrl}${item.render_url}`;
  }

  submitRating(body: {
    reviewer_id: string;
    prototype_id: number;
    representativeness: number;
    clarity: number;
  }): Promise<void> {
    return this.postJson("/ratings", { ...body, excluded: false });
  }

  excludePrototype(prototypeId: number, reviewerId: string): Promise<void> {
    return this.postJson(`/prototypes/${prototypeId}/exclude`, {
      reviewer_id: reviewerId,
      excluded: true,
    });
  }

  /** Dispatch one queued delivery to its endpoint. */
  deliver(item: PendingSubmission): Promise<void> {
    if (item.kind === "exclude") {
      return this.excludePrototype(item.prototype_id, item.reviewer_id);
    }
    return this.submitRating({
      reviewer_id: item.reviewer_id,
      prototype_id: item.prototype_id,
      representativeness: item.representativeness!,
      clarity: item.clarity!,
    });
  }

  summary(): Promise<SummaryResponse> {
    return this.getJson("/summary");
  }
}
