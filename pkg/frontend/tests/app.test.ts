import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, QuestionnaireView } from "../src/api.js";
import { App } from "../src/app.js";

const VIEW: QuestionnaireView = {
  version_id: "vtest",
  num_questions: 4,
  questions: (["O", "C"] as const).flatMap((trait) =>
    [1, 2].map((round) => ({
      trait,
      round,
      concept: `concept-${trait}${round}`,
      options: ["x", "y", "z"].map((k) => ({
        token: `${trait}${round}${k}`,
        image_id: `img-${trait}${round}${k}`,
        image_url: `/images/img-${trait}${round}${k}`,
      })),
    }))),
};

const SCORES = { O: 1.25, C: -0.5, E: 0.0, A: 2.125, N: -3.0 };

class FakeBackend {
  posts: any[] = [];
  failNextPost = false;

  fetch = async (input: RequestInfo | URL, init?: RequestInit):
      Promise<Response> => {
    const url = String(input);
    if (url.includes("/api/questionnaire")) {
      return Response.json(VIEW);
    }
    if (url.includes("/api/responses")) {
      if (this.failNextPost) {
        this.failNextPost = false;
        throw new TypeError("fetch failed");
      }
      const body = JSON.parse(String(init?.body));
      this.posts.push(body);
      return Response.json({ session_id: body.session_id, scores: SCORES });
    }
    return new Response("not found", { status: 404 });
  };
}

function clickOption(root: HTMLElement, position = 0): string {
  const buttons = root.querySelectorAll<HTMLButtonElement>("button.option");
  const button = buttons[position]!;
  const token = button.dataset.token!;
  button.click();
  return token;
}

describe("question flow", () => {
  let backend: FakeBackend;
  let root: HTMLElement;
  let app: App;

  beforeEach(async () => {
    backend = new FakeBackend();
    vi.stubGlobal("fetch", backend.fetch);
    window.localStorage.clear();
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app")!;
    app = new App(root, new ApiClient(), window.localStorage);
    await app.start();
  });

  afterEach(() => {
    vi.unstubAllGlobals();
  });

  it("renders one question at a time with progress", () => {
    expect(root.querySelector(".progress")!.textContent)
      .toBe("Question 1 / 4");
    expect(root.querySelectorAll("button.option")).toHaveLength(3);
    const images = root.querySelectorAll<HTMLImageElement>("img.option-image");
    expect(images[0]!.src).toContain("/images/img-O1x");
  });

  it("renders options exactly in server order", () => {
    const tokens = Array.from(
      root.querySelectorAll<HTMLButtonElement>("button.option"),
      (b) => b.dataset.token);
    expect(tokens).toEqual(["O1x", "O1y", "O1z"]);
  });

  it("clicking an image advances; back navigation returns", () => {
    clickOption(root, 1);
    expect(root.querySelector(".progress")!.textContent)
      .toBe("Question 2 / 4");
    (root.querySelector("button[data-action=back]") as HTMLButtonElement)
      .click();
    expect(root.querySelector(".progress")!.textContent)
      .toBe("Question 1 / 4");
    expect(root.querySelector("button.option.chosen")).not.toBeNull();
  });

  it("survives a reload with the cursor intact", async () => {
    clickOption(root);
    clickOption(root);
    const resumed = new App(root, new ApiClient(), window.localStorage);
    await resumed.start();
    expect(root.querySelector(".progress")!.textContent)
      .toBe("Question 3 / 4");
  });

  it("full flow: submit, verbatim scores, rating lands in a POST", async () => {
    const chosen = [clickOption(root), clickOption(root), clickOption(root),
                    clickOption(root, 2)];
    const submit = root.querySelector(
      "button[data-action=submit]") as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
    submit.click();
    await vi.waitFor(() => {
      expect(root.querySelector(".trait-score")).not.toBeNull();
    });
    expect(backend.posts).toHaveLength(1);
    expect(backend.posts[0].choices).toEqual(chosen);
    expect(new Set(Object.keys(backend.posts[0]))).toEqual(
      new Set(["session_id", "version_id", "choices", "started_at"]));
    for (const [trait, value] of Object.entries(SCORES)) {
      const span = root.querySelector(`[data-trait=${trait}]`)!;
      expect(span.textContent).toBe(value.toFixed(3));
    }
    expect(root.querySelectorAll("button.rating")).toHaveLength(7);
    (root.querySelector("button[data-rating='7']") as HTMLButtonElement)
      .click();
    await vi.waitFor(() => {
      expect(root.textContent).toContain("rated the accuracy 7 / 7");
    });
    expect(backend.posts).toHaveLength(2);
    expect(backend.posts[1].self_rating).toBe(7);
    expect(backend.posts[1].choices).toEqual(chosen);
  });

  it("explicit skip stores no extra POST and finishes with null rating", async () => {
    for (let i = 0; i < 4; i++) clickOption(root);
    (root.querySelector("button[data-action=submit]") as HTMLButtonElement)
      .click();
    await vi.waitFor(() => {
      expect(root.querySelector("button[data-action=skip-rating]"))
        .not.toBeNull();
    });
    (root.querySelector(
      "button[data-action=skip-rating]") as HTMLButtonElement).click();
    expect(root.textContent).toContain("Rating skipped");
    expect(backend.posts).toHaveLength(1);
    const stored = JSON.parse(
      window.localStorage.getItem("vbfi-session:vtest")!);
    expect(stored.phase).toBe("rated");
    expect(stored.selfRating).toBeNull();
  });

  it("network failure on submit keeps choices and offers retry", async () => {
    for (let i = 0; i < 4; i++) clickOption(root);
    backend.failNextPost = true;
    (root.querySelector("button[data-action=submit]") as HTMLButtonElement)
      .click();
    await vi.waitFor(() => {
      expect(root.querySelector(".banner")).not.toBeNull();
    });
    expect(root.textContent).toContain("answers are saved");
    const submit = root.querySelector(
      "button[data-action=submit]") as HTMLButtonElement;
    submit.click();
    await vi.waitFor(() => {
      expect(root.querySelector(".trait-score")).not.toBeNull();
    });
    expect(backend.posts).toHaveLength(1);
  });

  it("consumed payloads never carry scoring fields", () => {
    const seen: string[] = [];
    const walk = (node: unknown): void => {
      if (Array.isArray(node)) node.forEach(walk);
      else if (node && typeof node === "object") {
        for (const [key, value] of Object.entries(node)) {
          seen.push(key);
          walk(value);
        }
      }
    };
    walk(VIEW);
    for (const forbidden of ["leaf_value", "leaf_index", "F0", "shrinkage"]) {
      expect(seen).not.toContain(forbidden);
    }
  });
});
