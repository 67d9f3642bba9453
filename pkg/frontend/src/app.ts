import { ApiClient, isAbortError } from "./api.js";
import { NoProvisionsError, ViewState } from "./types.js";
import {
  renderAnswer,
  renderError,
  renderLoading,
  renderNoProvisions,
  renderSection,
  renderSectionError,
  renderShell,
} from "./view.js";

const INITIAL_STATE: ViewState = {
  phase: "idle",
  question: "",
  answer: null,
  noProvisions: false,
  errorMessage: null,
  section: null,
  sectionError: null,
  debug: false,
};

/** Single-page app: all state lives here and in the URL hash. */
export class App {
  readonly state: ViewState = { ...INITIAL_STATE };
  private controller: AbortController | null = null;
  private results: HTMLElement | null = null;
  private input: HTMLInputElement | null = null;

  constructor(private root: HTMLElement, private api: ApiClient) {}

  private readonly onHashChange = (): void => {
    void this.restoreFromUrl();
  };

  start(): void {
    this.renderShell();
    window.addEventListener("hashchange", this.onHashChange);
    void this.restoreFromUrl();
  }

  stop(): void {
    window.removeEventListener("hashchange", this.onHashChange);
    this.controller?.abort();
    this.controller = null;
  }

  private renderShell(): void {
    const { form, input, debugToggle, results } = renderShell(this.root,
                                                              this.state);
    this.results = results;
    this.input = input;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitQuery(input.value);
    });
    debugToggle.addEventListener("change", () => {
      this.state.debug = debugToggle.checked;
    });
  }

  /** Ask the service; a newer submission cancels the one in flight. */
  async submitQuery(text: string): Promise<void> {
    const question = text.trim();
    if (!question) {
      return;
    }
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;

    this.state.question = question;
    this.state.phase = "loading";
    this.state.answer = null;
    this.state.noProvisions = false;
    this.state.errorMessage = null;
    this.state.section = null;
    this.state.sectionError = null;
    if (this.input) {
      this.input.value = question;
    }
    window.location.hash = `#/q/${encodeURIComponent(question)}`;
    this.renderResults();

    try {
      const answer = await this.api.query(question, {
        trace: this.state.debug,
        signal: controller.signal,
      });
      if (controller !== this.controller) {
        return; // superseded by a later submission
      }
      this.state.phase = "answered";
      this.state.answer = answer;
    } catch (error) {
      if (isAbortError(error) || controller !== this.controller) {
        return;
      }
      if (error instanceof NoProvisionsError) {
        this.state.phase = "answered";
        this.state.answer = error.answer;
        this.state.noProvisions = true;
      } else {
        this.state.phase = "error";
        this.state.errorMessage =
          error instanceof Error ? error.message : String(error);
      }
    }
    this.renderResults();
  }

  /** Section detail view; ids come only from reference cards or the URL. */
  async openSection(id: string): Promise<void> {
    window.location.hash = `#/section/${encodeURIComponent(id)}`;
    try {
      const node = await this.api.getSection(id);
      this.state.section = node;
      this.state.sectionError = null;
    } catch (error) {
      this.state.section = null;
      this.state.sectionError =
        error instanceof Error ? error.message : String(error);
    }
    this.renderResults();
  }

  private backToResults(): void {
    this.state.section = null;
    this.state.sectionError = null;
    window.location.hash = this.state.question
      ? `#/q/${encodeURIComponent(this.state.question)}`
      : "";
    this.renderResults();
  }

  /** Deep links: #/q/<question> re-runs the query, #/section/<id> opens
   * the provision. */
  async restoreFromUrl(): Promise<void> {
    const hash = window.location.hash;
    const sectionMatch = /^#\/section\/(.+)$/.exec(hash);
    if (sectionMatch && sectionMatch[1]) {
      const id = decodeURIComponent(sectionMatch[1]);
      if (this.state.section?.id !== id) {
        await this.openSection(id);
      }
      return;
    }
    const queryMatch = /^#\/q\/(.+)$/.exec(hash);
    if (queryMatch && queryMatch[1]) {
      const question = decodeURIComponent(queryMatch[1]);
      if (question !== this.state.question || this.state.phase === "idle") {
        await this.submitQuery(question);
      }
      return;
    }
    if (this.state.section) {
      this.backToResults();
    }
  }

  renderResults(): void {
    const container = this.results;
    if (!container) {
      return;
    }
    if (this.state.sectionError) {
      const { back } = renderSectionError(container, this.state.sectionError);
      back.addEventListener("click", () => this.backToResults());
      return;
    }
    if (this.state.section) {
      const { back } = renderSection(container, this.state.section);
      back.addEventListener("click", () => this.backToResults());
      return;
    }
    switch (this.state.phase) {
      case "idle":
        container.textContent = "";
        return;
      case "loading":
        renderLoading(container);
        return;
      case "error": {
        const { retry } = renderError(container,
                                      this.state.errorMessage ?? "failed");
        retry.addEventListener("click", () => {
          void this.submitQuery(this.state.question);
        });
        return;
      }
      case "answered": {
        const answer = this.state.answer;
        if (!answer || this.state.noProvisions
            || answer.references.length === 0) {
          renderNoProvisions(container);
          return;
        }
        const links = renderAnswer(container, answer, this.state.debug);
        for (const link of links) {
          link.addEventListener("click", (event) => {
            event.preventDefault();
            void this.openSection(link.textContent ?? "");
          });
        }
        return;
      }
    }
  }
}
