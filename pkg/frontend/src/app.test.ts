import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { Answer } from "./types.js";

// the fixture mirrors a real service answer for the defective-ladder
// question in the reference corpus
const FIXTURE_ANSWER: Answer = {
  summary:
    "A defective ladder must be withdrawn from service (900.10(b)), tagged " +
    "with a warning label (900.10(b)(1)), and repaired before it is " +
    "returned to service (900.10(b)(2)).",
  references: [
    {
      section_id: "900.10(b)",
      text: "A defective ladder must be withdrawn from service, except as " +
        "provided in 900.10(b)(1) and (2).",
      source_url: "https://example.test/part900#900.10(b)",
    },
    {
      section_id: "900.10(b)(1)",
      text: "A defective ladder must be tagged with a warning label.",
      source_url: null,
    },
    {
      section_id: "900.10(b)(2)",
      text: "A tagged ladder must be repaired before it is returned to service.",
      source_url: null,
    },
  ],
};

const SECTION_NODE = {
  id: "900.10(b)",
  title: "Defective ladders",
  body: "A defective ladder must be withdrawn from service, except as " +
    "provided in 900.10(b)(1) and (2).",
  source_url: "https://example.test/part900#900.10(b)",
  order_index: 2,
};

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

type Handler = (url: string, init?: RequestInit) => Response | Promise<Response>;

function stubFetch(handler: Handler): Array<{ url: string; init?: RequestInit }> {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: unknown, init?: RequestInit) => {
      calls.push({ url: String(url), init });
      if (init?.signal?.aborted) {
        throw new DOMException("aborted", "AbortError");
      }
      return handler(String(url), init);
    }),
  );
  return calls;
}

const mounted: App[] = [];

function mountApp(): { app: App; root: HTMLElement } {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = new App(root, new ApiClient("http://api.test"));
  app.start();
  mounted.push(app);
  return { app, root };
}

beforeEach(() => {
  window.location.hash = "";
  document.body.textContent = "";
});

afterEach(() => {
  while (mounted.length) {
    mounted.pop()?.stop();
  }
  vi.unstubAllGlobals();
});

describe("submitting a query", () => {
  it("renders the summary and exactly N reference cards", async () => {
    stubFetch(() => json(FIXTURE_ANSWER));
    const { app, root } = mountApp();
    await app.submitQuery("What must be done with a defective ladder?");

    expect(root.querySelector(".summary")?.textContent).toBe(
      FIXTURE_ANSWER.summary);
    const cards = root.querySelectorAll(".reference-card");
    expect(cards.length).toBe(FIXTURE_ANSWER.references.length);
    const ids = Array.from(root.querySelectorAll(".section-link")).map(
      (link) => link.textContent);
    expect(ids).toEqual(["900.10(b)", "900.10(b)(1)", "900.10(b)(2)"]);
    // the summary comes before the cards in document order
    const results = root.querySelector(".results");
    expect(results?.firstElementChild?.className).toBe("summary");
  });

  it("renders verbatim provision text and source links on the cards", async () => {
    stubFetch(() => json(FIXTURE_ANSWER));
    const { app, root } = mountApp();
    await app.submitQuery("q");
    const first = root.querySelector(".reference-card");
    expect(first?.querySelector(".reference-text")?.textContent).toBe(
      FIXTURE_ANSWER.references[0]?.text);
    expect(first?.querySelector(".source-link")?.getAttribute("href")).toBe(
      FIXTURE_ANSWER.references[0]?.source_url);
  });

  it("results rendering is snapshot-stable for the fixture answer", async () => {
    stubFetch(() => json(FIXTURE_ANSWER));
    const { app, root } = mountApp();
    await app.submitQuery("What must be done with a defective ladder?");
    expect(root.querySelector(".results")?.innerHTML).toMatchSnapshot();
  });

  it("shows a loading indicator while the query is in flight", async () => {
    let release: (value: Response) => void = () => undefined;
    stubFetch(
      () => new Promise<Response>((resolve) => {
        release = resolve;
      }),
    );
    const { app, root } = mountApp();
    const pending = app.submitQuery("slow question");
    expect(root.querySelector(".loading")?.textContent).toContain("Searching");
    release(json(FIXTURE_ANSWER));
    await pending;
    expect(root.querySelector(".loading")).toBeNull();
    expect(root.querySelectorAll(".reference-card").length).toBe(3);
  });

  it("renders the no-provisions state on 422", async () => {
    stubFetch(() => json(
      { detail: "no entities found in question",
        answer: { summary: "No relevant provisions were found.",
                  references: [] } },
      422));
    const { app, root } = mountApp();
    await app.submitQuery("???");
    expect(root.querySelector(".no-provisions")?.textContent).toContain(
      "No provisions found");
    expect(root.querySelectorAll(".reference-card").length).toBe(0);
  });

  it("renders the error state with a working retry", async () => {
    let failures = 0;
    stubFetch(() => {
      if (failures === 0) {
        failures += 1;
        return json({ detail: "provider failure at stage decompose" }, 502);
      }
      return json(FIXTURE_ANSWER);
    });
    const { app, root } = mountApp();
    await app.submitQuery("flaky question");
    expect(root.querySelector(".error-message")?.textContent).toContain(
      "provider failure");
    const retry = root.querySelector<HTMLButtonElement>(".retry-button");
    expect(retry).not.toBeNull();
    retry?.click();
    await vi.waitFor(() => {
      expect(root.querySelectorAll(".reference-card").length).toBe(3);
    });
  });

  it("a later submission cancels the one in flight", async () => {
    const aborted: string[] = [];
    stubFetch((url, init) => {
      const body = JSON.parse(String(init?.body)) as { question: string };
      if (body.question === "first") {
        return new Promise<Response>((_resolve, reject) => {
          init?.signal?.addEventListener("abort", () => {
            aborted.push("first");
            reject(new DOMException("aborted", "AbortError"));
          });
        });
      }
      return json(FIXTURE_ANSWER);
    });
    const { app, root } = mountApp();
    const first = app.submitQuery("first");
    const second = app.submitQuery("second");
    await Promise.all([first, second]);
    expect(aborted).toEqual(["first"]);
    expect(root.querySelector(".error")).toBeNull();
    expect(root.querySelectorAll(".reference-card").length).toBe(3);
    expect(app.state.question).toBe("second");
  });

  it("shows the debug trace panel only when the toggle is on", async () => {
    const withTrace: Answer = {
      ...FIXTURE_ANSWER,
      trace: {
        entities: ["defective ladder"], triples: [],
        entity_candidates: [], triple_candidates: [], intersection: [],
        seeds: ["900.10(b)"], fallback_used: false,
        expanded: ["900.10(b)"], dropped_for_budget: [], reason: null,
      },
    };
    const calls = stubFetch(() => json(withTrace));
    const { app, root } = mountApp();
    await app.submitQuery("q");
    expect(root.querySelector(".trace-panel")).toBeNull();
    expect(calls[0]?.url).toBe("http://api.test/query");

    app.state.debug = true;
    await app.submitQuery("q again");
    expect(calls[1]?.url).toBe("http://api.test/query?trace=1");
    expect(root.querySelector(".trace-panel")).not.toBeNull();
    expect(root.querySelector(".trace-json")?.textContent).toContain(
      "defective ladder");
  });
});

describe("section detail view", () => {
  function stubQueryAndSection(): ReturnType<typeof stubFetch> {
    return stubFetch((url) => {
      if (url.includes("/sections/")) {
        if (url.endsWith("900.77")) {
          return json({ detail: "unknown section 900.77" }, 404);
        }
        return json(SECTION_NODE);
      }
      return json(FIXTURE_ANSWER);
    });
  }

  it("clicking a reference card link opens the provision", async () => {
    stubQueryAndSection();
    const { app, root } = mountApp();
    await app.submitQuery("q");
    const link = root.querySelector<HTMLAnchorElement>(".section-link");
    link?.click();
    await vi.waitFor(() => {
      expect(root.querySelector(".section-detail")).not.toBeNull();
    });
    expect(root.querySelector(".section-body")?.textContent).toBe(
      SECTION_NODE.body);
    expect(root.querySelector(".section-title")?.textContent).toBe(
      "Defective ladders");
  });

  it("back returns to the results view", async () => {
    stubQueryAndSection();
    const { app, root } = mountApp();
    await app.submitQuery("q");
    await app.openSection("900.10(b)");
    expect(root.querySelector(".section-detail")).not.toBeNull();
    root.querySelector<HTMLButtonElement>(".back-button")?.click();
    await vi.waitFor(() => {
      expect(root.querySelectorAll(".reference-card").length).toBe(3);
    });
  });

  it("404 renders an inline notice with a way back", async () => {
    stubQueryAndSection();
    const { app, root } = mountApp();
    await app.submitQuery("q");
    await app.openSection("900.77");
    expect(root.querySelector(".section-error")?.textContent).toContain(
      "unknown section");
    expect(root.querySelector(".back-button")).not.toBeNull();
  });

  it("deep-link URL restores the section view", async () => {
    stubQueryAndSection();
    const { app, root } = mountApp();
    window.location.hash = "#/section/900.10(b)";
    await app.restoreFromUrl();
    expect(root.querySelector(".section-detail")).not.toBeNull();
    expect(root.querySelector(".section-id")?.textContent).toBe("900.10(b)");
  });

  it("deep-link URL restores a query view", async () => {
    stubQueryAndSection();
    const { app, root } = mountApp();
    window.location.hash = `#/q/${encodeURIComponent("what about ladders?")}`;
    await app.restoreFromUrl();
    expect(app.state.question).toBe("what about ladders?");
    expect(root.querySelectorAll(".reference-card").length).toBe(3);
  });
});

describe("static chrome", () => {
  it("shows the registration bar placeholder and search box", () => {
    stubFetch(() => json(FIXTURE_ANSWER));
    const { root } = mountApp();
    expect(root.querySelector(".registration-bar")?.textContent).toBe("Sign in");
    expect(root.querySelector(".search-box")).not.toBeNull();
    expect(root.querySelector(".footer")?.textContent).toContain("Contact");
  });

  it("ignores empty submissions", async () => {
    const calls = stubFetch(() => json(FIXTURE_ANSWER));
    const { app } = mountApp();
    await app.submitQuery("   ");
    expect(calls.length).toBe(0);
    expect(app.state.phase).toBe("idle");
  });
});
