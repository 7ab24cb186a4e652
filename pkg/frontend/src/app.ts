// DOM entry point. All decisions live in the pure modules; this file only
// renders state and forwards events. Served from the same origin as the
// API (the service mounts the built assets at /ui), so the base URL is
// the page origin unless ?api= overrides it.

import { ApiClient } from "./api.js";
import { aggregatesMatch, formatMean, parseExportCsv } from "./aggregate.js";
import { ReviewController } from "./controller.js";
import { LIKERT_VALUES, requiredMetrics } from "./metrics.js";
import type { QueueFilter, ReviewItem } from "./queue.js";
import type { Method, SubjectKind } from "./types.js";

const RATER_KEY = "qaexplain.rater";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return override ?? window.location.origin;
}

function raterId(): string {
  let rater = window.localStorage.getItem(RATER_KEY);
  while (!rater || !rater.trim()) {
    rater = window.prompt("Choose a pseudonym for your ratings:", "") ?? "";
  }
  rater = rater.trim();
  window.localStorage.setItem(RATER_KEY, rater);
  return rater;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function explanationPanel(title: string, method: string, text: string): HTMLElement {
  const panel = el("section", "panel");
  const heading = el("h3", undefined, title);
  heading.append(" ", Object.assign(el("span", `badge badge-${method}`, method)));
  panel.append(heading, el("p", "explanation-text", text));
  return panel;
}

class App {
  private readonly controller: ReviewController;
  private readonly root: HTMLElement;
  private filter: QueueFilter = {};

  constructor(root: HTMLElement) {
    this.controller = new ReviewController(new ApiClient(apiBase()), raterId());
    this.root = root;
  }

  async start(): Promise<void> {
    try {
      await this.controller.load(this.filter);
      await this.controller.refreshAggregates();
    } catch {
      // lastError is set; render shows it without wiping the page
    }
    this.render();
  }

  private async applyFilter(filter: QueueFilter): Promise<void> {
    this.filter = filter;
    await this.start();
  }

  private render(): void {
    this.root.replaceChildren();
    this.root.append(this.header());
    if (this.controller.lastError) {
      this.root.append(el("div", "error-banner", this.controller.lastError));
    }
    const item = this.controller.current;
    if (item) {
      this.root.append(this.reviewSection(item));
    } else {
      this.root.append(
        el("p", "all-done", "No unrated explanations left for this filter. Thank you!"),
      );
    }
    this.root.append(this.aggregateSection());
  }

  private header(): HTMLElement {
    const header = el("header");
    header.append(el("h1", undefined, "Explanation rating"));
    const progress = el(
      "p",
      "progress",
      `${this.controller.unratedCount} to rate, ` +
        `${this.controller.completedItems.length} done (rater: ${this.controller.raterId})`,
    );
    header.append(progress, this.filterBar());
    return header;
  }

  private filterBar(): HTMLElement {
    const bar = el("div", "filter-bar");
    const methodSelect = el("select");
    methodSelect.append(new Option("all methods", ""));
    methodSelect.append(new Option("template", "template"), new Option("llm", "llm"));
    methodSelect.value = this.filter.method ?? "";
    const kindSelect = el("select");
    kindSelect.append(new Option("all subjects", ""));
    kindSelect.append(new Option("input data", "input"), new Option("output data", "output"));
    kindSelect.value = this.filter.subjectKind ?? "";
    const onChange = () => {
      void this.applyFilter({
        method: (methodSelect.value || undefined) as Method | undefined,
        subjectKind: (kindSelect.value || undefined) as SubjectKind | undefined,
      });
    };
    methodSelect.addEventListener("change", onChange);
    kindSelect.addEventListener("change", onChange);
    bar.append(methodSelect, kindSelect);
    return bar;
  }

  private reviewSection(item: ReviewItem): HTMLElement {
    const section = el("main", "review");

    const sideBySide = el("div", "side-by-side");
    sideBySide.append(explanationPanel("Explanation under review", item.method, item.text));
    const counterpart = this.controller.counterpartOf(item);
    if (counterpart) {
      sideBySide.append(
        explanationPanel("Same data, other method", counterpart.method, counterpart.text),
      );
    }
    section.append(sideBySide);

    if (item.rawData) {
      const raw = el("details", "raw-data");
      raw.append(el("summary", undefined, "Raw data behind this explanation"));
      raw.append(el("pre", undefined, item.rawData));
      section.append(raw);
    }

    section.append(this.ratingForm(item));
    return section;
  }

  private ratingForm(item: ReviewItem): HTMLElement {
    const form = el("form", "rating-form");
    form.append(
      el("p", "prompt-line", "Please rate this explanation from your perspective as an expert."),
    );
    for (const metric of requiredMetrics(item.subjectKind)) {
      const group = el("fieldset");
      group.append(el("legend", undefined, metric));
      for (const value of LIKERT_VALUES) {
        const label = el("label", "likert");
        const radio = el("input");
        radio.type = "radio";
        radio.name = metric;
        radio.value = String(value);
        radio.addEventListener("change", () => {
          this.controller.setValue(metric, value);
          submit.disabled = !this.controller.canSubmit;
        });
        label.append(radio, el("span", undefined, String(value)));
        group.append(label);
      }
      form.append(group);
    }
    const submit = el("button", "submit", "Submit and next");
    submit.type = "submit";
    submit.disabled = !this.controller.canSubmit;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.controller
        .submit()
        .then(() => this.controller.refreshAggregates())
        .catch(() => undefined)
        .then(() => this.render());
    });
    form.append(submit);
    return form;
  }

  private aggregateSection(): HTMLElement {
    const section = el("section", "aggregates");
    section.append(el("h2", undefined, "Aggregate ratings"));
    const table = el("table");
    const head = el("tr");
    for (const column of ["metric", "method", "count", "mean"]) {
      head.append(el("th", undefined, column));
    }
    table.append(head);
    for (const row of this.controller.aggregates) {
      const tr = el("tr");
      tr.append(
        el("td", undefined, row.metric),
        el("td", undefined, row.method),
        el("td", undefined, String(row.count)),
        el("td", undefined, formatMean(row.mean)),
      );
      table.append(tr);
    }
    section.append(table);

    const checkButton = el("button", "check-export", "Check against CSV export");
    checkButton.addEventListener("click", () => {
      void this.controller.api.exportCsv().then((csv) => {
        const ok = aggregatesMatch(this.controller.aggregates, parseExportCsv(csv));
        window.alert(ok ? "Aggregates match the export." : "Mismatch against the export!");
      });
    });
    section.append(checkButton);
    return section;
  }
}

const mount = document.getElementById("app");
if (mount) void new App(mount).start();
