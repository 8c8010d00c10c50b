/**
 * Token counting for the extra-text box.
 *
 * Mirrors the service tokenizer's word rule (lowercase alphanumeric runs)
 * so the counter can warn before the service would reject the request.
 * The service stays the authority; this is display arithmetic only.
 */

/** Content positions available in an instruction (77 minus start/end). */
export const MAX_CONTENT_TOKENS = 75;

export function splitWords(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
}

export function countTokens(text: string): number {
  return splitWords(text).length;
}

/** Content rows left for user text after a learned instruction's k rows. */
export function budgetFor(learnedK: number): number {
  return MAX_CONTENT_TOKENS - learnedK;
}

export function wouldOverflow(learnedK: number, extraText: string): boolean {
  return countTokens(extraText) > budgetFor(learnedK);
}
