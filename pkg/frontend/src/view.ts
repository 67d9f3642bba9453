import { Answer, SectionNode, ViewState } from "./types.js";

// All rendering goes through createElement/textContent: the UI shows
// exactly what the Answer JSON contains, nothing interpolated as HTML.

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderShell(root: HTMLElement, state: ViewState): {
  form: HTMLFormElement;
  input: HTMLInputElement;
  debugToggle: HTMLInputElement;
  results: HTMLElement;
} {
  root.textContent = "";

  const header = el("header", "top-bar");
  header.appendChild(el("div", "brand", "Regulation Search"));
  // static placeholder; there are no user accounts
  header.appendChild(el("div", "registration-bar", "Sign in"));
  root.appendChild(header);

  const form = el("form", "search-form");
  const input = el("input", "search-box");
  input.type = "search";
  input.name = "question";
  input.placeholder = "Ask about a regulation…";
  input.value = state.question;
  const button = el("button", "search-button", "Search");
  button.type = "submit";
  form.appendChild(input);
  form.appendChild(button);

  const debugLabel = el("label", "debug-toggle");
  const debugToggle = el("input");
  debugToggle.type = "checkbox";
  debugToggle.checked = state.debug;
  debugLabel.appendChild(debugToggle);
  debugLabel.appendChild(document.createTextNode(" debug trace"));
  form.appendChild(debugLabel);
  root.appendChild(form);

  const results = el("main", "results");
  root.appendChild(results);

  const footer = el("footer", "footer", "Contact: safety@example.test");
  root.appendChild(footer);

  return { form, input, debugToggle, results };
}

export function renderLoading(container: HTMLElement): void {
  container.textContent = "";
  container.appendChild(el("div", "loading", "Searching…"));
}

export function renderError(container: HTMLElement, message: string): {
  retry: HTMLButtonElement;
} {
  container.textContent = "";
  const box = el("div", "error");
  box.appendChild(el("p", "error-message", message));
  const retry = el("button", "retry-button", "Retry");
  retry.type = "button";
  box.appendChild(retry);
  container.appendChild(box);
  return { retry };
}

export function renderNoProvisions(container: HTMLElement): void {
  container.textContent = "";
  container.appendChild(
    el("div", "no-provisions",
       "No provisions found for this question."));
}

export function renderAnswer(container: HTMLElement, answer: Answer,
                             debug: boolean): HTMLAnchorElement[] {
  container.textContent = "";
  container.appendChild(el("section", "summary", answer.summary));

  const list = el("section", "reference-cards");
  const links: HTMLAnchorElement[] = [];
  for (const reference of answer.references) {
    const card = el("article", "reference-card");
    const heading = el("h3", "reference-id");
    const link = el("a", "section-link", reference.section_id);
    link.href = `#/section/${encodeURIComponent(reference.section_id)}`;
    heading.appendChild(link);
    links.push(link);
    card.appendChild(heading);
    card.appendChild(el("p", "reference-text", reference.text));
    if (reference.source_url) {
      const source = el("a", "source-link", "original text");
      source.href = reference.source_url;
      source.rel = "noopener";
      card.appendChild(source);
    }
    list.appendChild(card);
  }
  container.appendChild(list);

  if (debug && answer.trace) {
    const panel = el("details", "trace-panel");
    panel.appendChild(el("summary", undefined, "retrieval trace"));
    panel.appendChild(el("pre", "trace-json",
                         JSON.stringify(answer.trace, null, 2)));
    container.appendChild(panel);
  }
  return links;
}

export function renderSection(container: HTMLElement, node: SectionNode): {
  back: HTMLButtonElement;
} {
  container.textContent = "";
  const detail = el("article", "section-detail");
  const back = el("button", "back-button", "← back to results");
  back.type = "button";
  detail.appendChild(back);
  detail.appendChild(el("h2", "section-id", node.id));
  if (node.title) {
    detail.appendChild(el("h3", "section-title", node.title));
  }
  detail.appendChild(el("p", "section-body", node.body || node.title || ""));
  if (node.source_url) {
    const source = el("a", "source-link", "original text");
    source.href = node.source_url;
    source.rel = "noopener";
    detail.appendChild(source);
  }
  container.appendChild(detail);
  return { back };
}

export function renderSectionError(container: HTMLElement, message: string): {
  back: HTMLButtonElement;
} {
  container.textContent = "";
  const box = el("div", "section-error");
  box.appendChild(el("p", "error-message", message));
  const back = el("button", "back-button", "← back to results");
  back.type = "button";
  box.appendChild(back);
  container.appendChild(box);
  return { back };
}
