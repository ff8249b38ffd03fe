/** Keyboard shortcuts: digits pick a choice, hundreds of judgments per session
 * make the mouse optional. */

export function keyToChoiceIndex(key: string, choiceCount: number): number | null {
  if (!/^[1-9]$/.test(key)) {
    return null;
  }
  const index = Number(key) - 1;
  return index < choiceCount ? index : null;
}
