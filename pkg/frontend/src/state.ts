/** Session state machine for the test flow.
 *
 * Pure data + transition functions so the flow is testable without a DOM:
 * the cursor only advances on a choice, submission only unlocks once every
 * question has one, and everything round-trips through localStorage so a
 * reload mid-test restores the session.
 */

import type { QuestionnaireView, TraitScores } from "./api.js";

export type Phase = "choosing" | "submitted" | "rated";

export interface UiSession {
  sessionId: string;
  versionId: string;
  cursor: number;
  /** chosen option token per question index; null = not answered yet */
  choices: (string | null)[];
  phase: Phase;
  scores: TraitScores | null;
  selfRating: number | null;
  startedAt: string;
}

export function newSession(view: QuestionnaireView, sessionId: string,
                           now: () => string = isoNow): UiSession {
  return {
    sessionId,
    versionId: view.version_id,
    cursor: 0,
    choices: new Array(view.questions.length).fill(null),
    phase: "choosing",
    scores: null,
    selfRating: null,
    startedAt: now(),
  };
}

function isoNow(): string {
  return new Date().toISOString();
}

export function answeredCount(s: UiSession): number {
  return s.choices.filter((c) => c !== null).length;
}

export function isComplete(s: UiSession): boolean {
  return answeredCount(s) === s.choices.length;
}

/** Record a choice for the current question and advance the cursor. */
export function choose(s: UiSession, token: string): UiSession {
  if (s.phase !== "choosing") return s;
  const choices = s.choices.slice();
  choices[s.cursor] = token;
  const cursor = Math.min(s.cursor + 1, s.choices.length);
  return { ...s, choices, cursor };
}

/** Step back one question; allowed any time before submission. */
export function back(s: UiSession): UiSession {
  if (s.phase !== "choosing" || s.cursor === 0) return s;
  return { ...s, cursor: s.cursor - 1 };
}

/** True when the cursor sits past the last question (review screen). */
export function atReview(s: UiSession): boolean {
  return s.cursor >= s.choices.length;
}

export function withScores(s: UiSession, scores: TraitScores): UiSession {
  return { ...s, scores, phase: "submitted" };
}

export function withRating(s: UiSession, rating: number | null): UiSession {
  return { ...s, selfRating: rating, phase: "rated" };
}

export function completedChoices(s: UiSession): string[] {
  if (!isComplete(s)) {
    throw new Error(
      `submission requires all ${s.choices.length} choices, ` +
      `have ${answeredCount(s)}`);
  }
  return s.choices as string[];
}

// -- persistence -----------------------------------------------------------

const STORAGE_PREFIX = "vbfi-session:";

export function storageKey(versionId: string): string {
  return `${STORAGE_PREFIX}${versionId}`;
}

export function saveSession(store: Storage, s: UiSession): void {
  store.setItem(storageKey(s.versionId), JSON.stringify(s));
}

export function loadSession(store: Storage, versionId: string,
                            expectedQuestions: number): UiSession | null {
  const raw = store.getItem(storageKey(versionId));
  if (raw === null) return null;
  try {
    const parsed = JSON.parse(raw) as UiSession;
    if (!Array.isArray(parsed.choices)
        || parsed.choices.length !== expectedQuestions
        || typeof parsed.sessionId !== "string") {
      return null;
    }
    return parsed;
  } catch {
    return null;
  }
}

export function clearSession(store: Storage, versionId: string): void {
  store.removeItem(storageKey(versionId));
}

export function freshSessionId(randomness: () => number = Math.random): string {
  const alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  let id = "s-";
  for (let i = 0; i < 16; i++) {
    id += alphabet[Math.floor(randomness() * alphabet.length)];
  }
  return id;
}
