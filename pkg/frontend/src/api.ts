import {
  Answer,
  ApiError,
  HealthInfo,
  NoProvisionsError,
  SectionNode,
} from "./types.js";

/** Typed client for the qa-service HTTP API. */
export class ApiClient {
  constructor(private baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async query(
    question: string,
    options: { trace?: boolean; signal?: AbortSignal } = {},
  ): Promise<Answer> {
    const suffix = options.trace ? "?trace=1" : "";
    const response = await fetch(`${this.baseUrl}/query${suffix}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
      signal: options.signal,
    });
    if (response.status === 422) {
      const body = (await response.json()) as { answer: Answer };
      throw new NoProvisionsError(body.answer);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await describeError(response));
    }
    return (await response.json()) as Answer;
  }

  async getSection(id: string, signal?: AbortSignal): Promise<SectionNode> {
    const response = await fetch(
      `${this.baseUrl}/sections/${encodeURIComponent(id)}`,
      { signal },
    );
    if (!response.ok) {
      throw new ApiError(response.status, await describeError(response));
    }
    return (await response.json()) as SectionNode;
  }

  async health(): Promise<HealthInfo> {
    const response = await fetch(`${this.baseUrl}/health`);
    if (!response.ok) {
      throw new ApiError(response.status, await describeError(response));
    }
    return (await response.json()) as HealthInfo;
  }
}

async function describeError(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) {
      return body.detail;
    }
  } catch {
    // fall through to the generic message
  }
  return `HTTP ${response.status}`;
}

export function isAbortError(error: unknown): boolean {
  return error instanceof DOMException && error.name === "AbortError";
}
