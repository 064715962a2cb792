/** DOM wiring for the test flow: one question per screen, then results.
 *
 * The server decides option order (display_order is applied before the
 * payload leaves the service); this layer renders options exactly as
 * received and never learns what a choice is worth.
 */

import { ApiClient, ApiError, QuestionnaireView } from "./api.js";
import {
  RATING_PROMPT,
  RATING_SCALE_HINT,
  TRAIT_EXPLANATIONS,
  TRAIT_NAMES,
  TRAIT_ORDER,
} from "./content.js";
import { renderRadar } from "./radar.js";
import {
  UiSession,
  atReview,
  answeredCount,
  back,
  choose,
  clearSession,
  completedChoices,
  freshSessionId,
  isComplete,
  loadSession,
  newSession,
  saveSession,
  withRating,
  withScores,
} from "./state.js";

export class App {
  private view: QuestionnaireView | null = null;
  private session: UiSession | null = null;
  private banner: string | null = null;

  constructor(private readonly root: HTMLElement,
              private readonly client: ApiClient,
              private readonly storage: Storage) {}

  async start(version?: string): Promise<void> {
    this.root.innerHTML = "<p class='status'>Loading questionnaire…</p>";
    try {
      this.view = await this.client.fetchQuestionnaire(version);
    } catch (err) {
      this.renderFatal(err, () => void this.start(version));
      return;
    }
    const restored = loadSession(this.storage, this.view.version_id,
                                 this.view.questions.length);
    this.session = restored ?? newSession(this.view, freshSessionId());
    this.persist();
    this.render();
  }

  private persist(): void {
    if (this.session) saveSession(this.storage, this.session);
  }

  private update(next: UiSession): void {
    this.session = next;
    this.persist();
    this.render();
  }

  render(): void {
    const view = this.view;
    const session = this.session;
    if (!view || !session) return;
    this.root.innerHTML = "";
    if (this.banner !== null) {
      const note = el("div", "banner", this.banner);
      this.root.appendChild(note);
    }
    if (session.phase !== "choosing") {
      this.renderResults(session);
      return;
    }
    if (atReview(session)) {
      this.renderReview(session);
    } else {
      this.renderQuestion(view, session);
    }
  }

  private renderQuestion(view: QuestionnaireView, session: UiSession): void {
    const question = view.questions[session.cursor];
    if (!question) return;
    const header = el("header", "question-header");
    header.appendChild(el("div", "progress",
                          `Question ${session.cursor + 1} / ${view.questions.length}`));
    header.appendChild(el("h2", "prompt", "Which image do you like most?"));
    this.root.appendChild(header);

    const grid = el("div", "option-grid");
    for (const option of question.options) {
      const button = el("button", "option") as HTMLButtonElement;
      button.type = "button";
      button.dataset.token = option.token;
      if (session.choices[session.cursor] === option.token) {
        button.classList.add("chosen");
      }
      const img = el("img", "option-image") as HTMLImageElement;
      img.src = this.client.imageUrl(option);
      img.alt = option.image_id;
      img.loading = "lazy";
      button.appendChild(img);
      button.addEventListener("click", () =>
        this.update(choose(session, option.token)));
      grid.appendChild(button);
    }
    this.root.appendChild(grid);

    const nav = el("nav", "controls");
    const backButton = el("button", "secondary", "Back") as HTMLButtonElement;
    backButton.type = "button";
    backButton.disabled = session.cursor === 0;
    backButton.dataset.action = "back";
    backButton.addEventListener("click", () => this.update(back(session)));
    nav.appendChild(backButton);
    nav.appendChild(el("span", "answered",
                       `${answeredCount(session)} answered`));
    this.root.appendChild(nav);
  }

  private renderReview(session: UiSession): void {
    this.root.appendChild(el("h2", "prompt", "All questions answered"));
    this.root.appendChild(el(
      "p", "status",
      "Submit to see your five derived trait scores."));
    const nav = el("nav", "controls");
    const backButton = el("button", "secondary", "Back") as HTMLButtonElement;
    backButton.type = "button";
    backButton.dataset.action = "back";
    backButton.addEventListener("click", () => this.update(back(session)));
    nav.appendChild(backButton);
    const submit = el("button", "primary", "Submit answers") as HTMLButtonElement;
    submit.type = "button";
    submit.dataset.action = "submit";
    submit.disabled = !isComplete(session);
    submit.addEventListener("click", () => void this.submit());
    nav.appendChild(submit);
    this.root.appendChild(nav);
  }

  private async submit(): Promise<void> {
    const session = this.session;
    if (!session || !isComplete(session)) return;
    this.banner = null;
    try {
      const result = await this.client.submitResponse({
        session_id: session.sessionId,
        version_id: session.versionId,
        choices: completedChoices(session),
        started_at: session.startedAt,
      });
      this.update(withScores(session, result.scores));
    } catch (err) {
      this.showRecoverable(err);
    }
  }

  private async sendRating(rating: number | null): Promise<void> {
    const session = this.session;
    if (!session || session.scores === null) return;
    this.banner = null;
    if (rating === null) {
      // explicit skip: the stored row already carries a null rating
      this.update(withRating(session, null));
      return;
    }
    try {
      await this.client.submitResponse({
        session_id: session.sessionId,
        version_id: session.versionId,
        choices: completedChoices(session),
        self_rating: rating,
      });
      this.update(withRating(session, rating));
    } catch (err) {
      this.showRecoverable(err);
    }
  }

  private renderResults(session: UiSession): void {
    const scores = session.scores ?? {};
    this.root.appendChild(el("h2", "prompt", "Your derived traits"));
    const chart = el("div", "chart");
    chart.appendChild(renderRadar(
      TRAIT_ORDER.map((t) => ({ label: t, value: scores[t] ?? 0 }))));
    this.root.appendChild(chart);

    const list = el("dl", "trait-list");
    for (const trait of TRAIT_ORDER) {
      const value = scores[trait];
      const term = el("dt", "trait-name");
      term.appendChild(el("span", "trait-code", trait));
      term.appendChild(el("span", "trait-title", TRAIT_NAMES[trait] ?? trait));
      const score = el("span", "trait-score",
                       value === undefined ? "–" : value.toFixed(3));
      score.dataset.trait = trait;
      term.appendChild(score);
      list.appendChild(term);
      list.appendChild(el("dd", "trait-explanation",
                          TRAIT_EXPLANATIONS[trait] ?? ""));
    }
    this.root.appendChild(list);

    if (session.phase === "submitted") {
      this.root.appendChild(el("h3", "prompt", RATING_PROMPT));
      this.root.appendChild(el("p", "status", RATING_SCALE_HINT));
      const scale = el("div", "rating-scale");
      for (let rating = 1; rating <= 7; rating++) {
        const button = el("button", "rating", String(rating)) as HTMLButtonElement;
        button.type = "button";
        button.dataset.rating = String(rating);
        button.addEventListener("click", () => void this.sendRating(rating));
        scale.appendChild(button);
      }
      this.root.appendChild(scale);
      const skip = el("button", "secondary", "Skip") as HTMLButtonElement;
      skip.type = "button";
      skip.dataset.action = "skip-rating";
      skip.addEventListener("click", () => void this.sendRating(null));
      this.root.appendChild(skip);
    } else {
      const note = session.selfRating === null
        ? "Rating skipped. Thanks for taking the test!"
        : `Thanks! You rated the accuracy ${session.selfRating} / 7.`;
      this.root.appendChild(el("p", "status done", note));
      const again = el("button", "secondary", "Take it again") as HTMLButtonElement;
      again.type = "button";
      again.dataset.action = "restart";
      again.addEventListener("click", () => {
        clearSession(this.storage, session.versionId);
        void this.start(session.versionId);
      });
      this.root.appendChild(again);
    }
  }

  private showRecoverable(err: unknown): void {
    const message = err instanceof ApiError
      ? `Submission failed (${err.message}). Your answers are saved.`
      : `Submission failed: ${String(err)}. Your answers are saved.`;
    this.banner = message;
    this.render();
  }

  private renderFatal(err: unknown, retry: () => void): void {
    this.root.innerHTML = "";
    const message = err instanceof ApiError ? err.message : String(err);
    this.root.appendChild(el("p", "status error",
                             `Could not load the questionnaire: ${message}`));
    const button = el("button", "primary", "Retry") as HTMLButtonElement;
    button.type = "button";
    button.dataset.action = "retry";
    button.addEventListener("click", retry);
    this.root.appendChild(button);
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
