/** Static presentation copy; never part of the scoring path. */

export const TRAIT_ORDER = ["O", "C", "E", "A", "N"] as const;

export const TRAIT_NAMES: Record<string, string> = {
  O: "Openness",
  C: "Conscientiousness",
  E: "Extraversion",
  A: "Agreeableness",
  N: "Neuroticism",
};

export const TRAIT_EXPLANATIONS: Record<string, string> = {
  O: "Curiosity and taste for new experiences: imagination, aesthetics, " +
     "and openness to unconventional ideas.",
  C: "Self-discipline and organization: planning ahead, persistence, and " +
     "reliability in finishing what is started.",
  E: "Energy directed outward: sociability, assertiveness, and comfort " +
     "being the center of attention.",
  A: "Warmth toward others: cooperation, trust, and willingness to " +
     "compromise in conflicts.",
  N: "Sensitivity to stress: how strongly moods swing and how easily " +
     "worry or irritation take hold.",
};

export const RATING_PROMPT =
  "How accurate do you find this description of yourself?";

export const RATING_SCALE_HINT = "1 = not at all accurate, 7 = very accurate";
