// Typed client for the reader-study HTTP API. The payloads deliberately
// carry no ground-truth information; this module only ever sees stimulus
// ids, image URLs and progress counters.

export interface SessionState {
  reader: string;
  total: number;
  answered: number;
  complete: boolean;
}

export interface StimulusPayload {
  id: string;
  index: number;
  total: number;
  image_url: string;
}

export type NextResponse =
  | { done: false; stimulus: StimulusPayload }
  | { done: true; total: number };

export type SubmitOutcome =
  | { status: "recorded"; answered: number; remaining: number }
  | { status: "duplicate" };

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class StudyApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!res.ok) {
      throw new ApiError(res.status, `GET ${path} failed: ${res.status}`);
    }
    return (await res.json()) as T;
  }

  session(reader: string): Promise<SessionState> {
    return this.getJson(`/api/session/${encodeURIComponent(reader)}`);
  }

  next(reader: string): Promise<NextResponse> {
    return this.getJson(`/api/session/${encodeURIComponent(reader)}/next`);
  }

  imageUrl(stimulusUrl: string): string {
    return `${this.baseUrl}${stimulusUrl}`;
  }

  // A 409 means the response was already recorded (e.g. a retried request
  // that reached the server the first time); callers treat it as success.
  async submit(reader: string, stimulusId: string, choice: number): Promise<SubmitOutcome> {
    const res = await this.fetchFn(
      `${this.baseUrl}/api/session/${encodeURIComponent(reader)}/response`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ stimulus_id: stimulusId, choice }),
      },
    );
    if (res.status === 409) {
      return { status: "duplicate" };
    }
    if (!res.ok) {
      throw new ApiError(res.status, `submit failed: ${res.status}`);
    }
    const doc = (await res.json()) as { answered: number; remaining: number };
    return { status: "recorded", answered: doc.answered, remaining: doc.remaining };
  }
}
