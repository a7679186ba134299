/** DOM controller: wires the session state machine and results chart
 * to the page. Fully keyboard-operable: left/right arrows select a
 * side, Enter submits; buttons remain tab-reachable for screen
 * readers.
 */

import type { RatingClient } from "./api.js";
import { renderResults } from "./chart.js";
import { RatingSession, type SessionState } from "./session.js";
import type { Side } from "./types.js";

type View = "rate" | "results";

function element<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const el = doc.createElement(tag);
  if (className) el.className = className;
  if (text !== undefined) el.textContent = text;
  return el;
}

export class PageController {
  private readonly doc: Document;
  private readonly api: RatingClient;
  private readonly session: RatingSession;
  private readonly root: HTMLElement;
  private readonly main: HTMLElement;
  private view: View = "rate";
  private selected: Side = "left";

  constructor(doc: Document, api: RatingClient, raterId: string, root?: HTMLElement) {
    this.doc = doc;
    this.api = api;
    this.session = new RatingSession(api, raterId);
    this.root = root ?? (doc.getElementById("app") as HTMLElement);
    this.root.replaceChildren();
    this.root.appendChild(this.buildHeader());
    this.main = element(doc, "main", "view");
    this.root.appendChild(this.main);
    this.session.onChange((state) => {
      if (this.view === "rate") this.renderRate(state);
    });
    doc.addEventListener("keydown", (event) => this.onKey(event));
  }

  async start(): Promise<void> {
    await this.session.start();
  }

  private buildHeader(): HTMLElement {
    const header = element(this.doc, "header");
    header.appendChild(element(this.doc, "h1", "title", "Flood realism study"));
    const nav = element(this.doc, "nav");
    const rateButton = element(this.doc, "button", "nav-rate", "Rate images");
    rateButton.addEventListener("click", () => this.showRate());
    const resultsButton = element(this.doc, "button", "nav-results", "Results");
    resultsButton.addEventListener("click", () => {
      void this.showResults();
    });
    nav.append(rateButton, resultsButton);
    header.appendChild(nav);
    return header;
  }

  private showRate(): void {
    this.view = "rate";
    this.renderRate(this.session.state);
  }

  private async showResults(): Promise<void> {
    this.view = "results";
    this.main.replaceChildren(element(this.doc, "p", "loading", "Loading results..."));
    try {
      const payload = await this.api.fetchResults();
      if (this.view !== "results") return;
      this.main.replaceChildren(renderResults(this.doc, payload));
    } catch (error) {
      if (this.view !== "results") return;
      const banner = element(this.doc, "div", "banner error");
      banner.appendChild(element(this.doc, "p", undefined, `Could not load results: ${String(error)}`));
      const retry = element(this.doc, "button", "retry", "Retry");
      retry.addEventListener("click", () => {
        void this.showResults();
      });
      banner.appendChild(retry);
      this.main.replaceChildren(banner);
    }
  }

  private onKey(event: KeyboardEvent): void {
    if (this.view !== "rate" || this.session.state.kind !== "pair") return;
    if (event.key === "ArrowLeft") {
      this.selected = "left";
      this.renderRate(this.session.state);
    } else if (event.key === "ArrowRight") {
      this.selected = "right";
      this.renderRate(this.session.state);
    } else if (event.key === "Enter") {
      void this.session.choose(this.selected);
    }
  }

  private renderRate(state: SessionState): void {
    switch (state.kind) {
      case "loading":
        this.main.replaceChildren(element(this.doc, "p", "loading", "Loading next pair..."));
        return;
      case "pair": {
        this.main.replaceChildren(this.pairView(state.pair, state.notice));
        return;
      }
      case "submitting":
        this.main.replaceChildren(element(this.doc, "p", "loading", "Recording your choice..."));
        return;
      case "offline": {
        const banner = element(this.doc, "div", "banner error");
        banner.appendChild(
          element(
            this.doc,
            "p",
            undefined,
            state.hasQueuedVote
              ? "Connection lost; your vote is saved locally and will be resubmitted."
              : "Connection lost while fetching the next pair.",
          ),
        );
        const retry = element(this.doc, "button", "retry", "Retry");
        retry.addEventListener("click", () => {
          void this.session.retry();
        });
        banner.appendChild(retry);
        this.main.replaceChildren(banner);
        return;
      }
      case "done": {
        const done = element(this.doc, "div", "done");
        done.appendChild(element(this.doc, "h2", undefined, "All done, thank you!"));
        done.appendChild(
          element(this.doc, "p", undefined, `You contributed ${state.votesCast} evaluations.`),
        );
        this.main.replaceChildren(done);
        return;
      }
    }
  }

  private pairView(pair: { pair_id: string; prompt: string; left: { image_url: string }; right: { image_url: string } }, notice?: string): HTMLElement {
    const section = element(this.doc, "section", "pair");
    section.dataset["pairId"] = pair.pair_id;
    section.appendChild(element(this.doc, "p", "prompt", pair.prompt));
    if (notice) {
      section.appendChild(element(this.doc, "p", "notice", notice));
    }
    const sides = element(this.doc, "div", "sides");
    for (const side of ["left", "right"] as const) {
      const figure = element(this.doc, "figure", `side ${side}`);
      if (side === this.selected) figure.classList.add("selected");
      const img = element(this.doc, "img") as HTMLImageElement;
      img.src = pair[side].image_url;
      img.alt = `${side} flood rendering`;
      figure.appendChild(img);
      const pick = element(this.doc, "button", "pick", `Choose ${side}`);
      pick.addEventListener("click", () => {
        this.selected = side;
        void this.session.choose(side);
      });
      figure.appendChild(pick);
      sides.appendChild(figure);
    }
    section.appendChild(sides);
    section.appendChild(
      element(
        this.doc,
        "p",
        "hint",
        "Use the left/right arrow keys to select and Enter to submit.",
      ),
    );
    return section;
  }
}
