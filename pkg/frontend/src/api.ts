/** Typed client for the questionnaire service.
 *
 * The payloads deliberately contain no scoring information: options are
 * opaque tokens plus image references, and scores only come back from the
 * server after submission.
 */

export interface OptionView {
  token: string;
  image_id: string;
  image_url: string;
}

export interface QuestionView {
  trait: string;
  round: number;
  concept: string;
  options: OptionView[];
}

export interface QuestionnaireView {
  version_id: string;
  num_questions: number;
  questions: QuestionView[];
}

export interface TraitScores {
  [trait: string]: number;
}

export interface SubmitResult {
  session_id: string;
  scores: TraitScores;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number | null) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let detail = `${resp.status}`;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(detail, resp.status);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async fetchQuestionnaire(version?: string): Promise<QuestionnaireView> {
    const query = version ? `?version=${encodeURIComponent(version)}` : "";
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/api/questionnaire${query}`);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, null);
    }
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as QuestionnaireView;
  }

  async submitResponse(body: {
    session_id: string;
    version_id: string;
    choices: string[];
    self_rating?: number | null;
    started_at?: string;
  }): Promise<SubmitResult> {
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/api/responses`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`, null);
    }
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as SubmitResult;
  }

  imageUrl(option: OptionView): string {
    return `${this.baseUrl}${option.image_url}`;
  }
}
