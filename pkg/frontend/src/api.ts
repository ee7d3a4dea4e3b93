// Thin typed client over the review API. All truth lives server-side; the
// UI never caches beyond the current screen.

import type {
  AnnotationOut,
  ConversationDoc,
  NextSampleDoc,
  SaturationDoc,
  SubmitResponse,
  TimelineMessage,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`API error ${status}: ${detail}`);
  }
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async nextSample(workflow: string): Promise<NextSampleDoc> {
    const res = await fetch(this.url(`/api/next-sample?workflow=${workflow}`));
    return asJson<NextSampleDoc>(res);
  }

  async conversation(convId: string): Promise<ConversationDoc> {
    const res = await fetch(this.url(`/api/conversations/${encodeURIComponent(convId)}`));
    return asJson<ConversationDoc>(res);
  }

  async timeline(pseudonym: string): Promise<{ pseudonym: string; messages: TimelineMessage[] }> {
    const res = await fetch(
      this.url(`/api/users/${encodeURIComponent(pseudonym)}/timeline`),
    );
    return asJson(res);
  }

  async saturation(workflow: string): Promise<SaturationDoc> {
    const res = await fetch(this.url(`/api/saturation?workflow=${workflow}`));
    return asJson<SaturationDoc>(res);
  }

  async submit(annotation: AnnotationOut): Promise<SubmitResponse> {
    const res = await fetch(this.url("/api/annotations"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(annotation),
    });
    return asJson<SubmitResponse>(res);
  }
}
