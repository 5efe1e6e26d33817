import { ApiClient, ApiError } from "./api.js";
import type { Character, DuplicatePair } from "./types.js";

export interface CharacterPanelState {
  characters: Character[];
  duplicates: DuplicatePair[];
  threshold: number;
}

export async function loadCharacterPanel(
  api: ApiClient,
  series: string,
  threshold?: number,
): Promise<CharacterPanelState> {
  const [list, duplicates] = await Promise.all([
    api.characters(series),
    api.duplicateCharacters(series, threshold),
  ]);
  return {
    characters: list.characters,
    duplicates: duplicates.pairs,
    threshold: duplicates.threshold,
  };
}

export interface CharacterPanelHandlers {
  onMerge: (keepId: string, dropId: string) => void;
}

export function renderCharacterPanel(
  container: HTMLElement,
  state: CharacterPanelState,
  handlers: CharacterPanelHandlers,
): void {
  container.textContent = "";

  const listHeading = document.createElement("h3");
  listHeading.textContent = `Characters (${state.characters.length})`;
  container.appendChild(listHeading);

  const list = document.createElement("ul");
  list.className = "character-list";
  for (const character of state.characters) {
    const item = document.createElement("li");
    item.dataset.characterId = character.character_id;
    const names = character.appellations.filter((a) => a !== character.preferred_name);
    item.textContent = names.length
      ? `${character.preferred_name} (also: ${names.join(", ")})`
      : character.preferred_name;
    list.appendChild(item);
  }
  container.appendChild(list);

  const duplicatesHeading = document.createElement("h3");
  duplicatesHeading.textContent = `Possible duplicates at threshold ${state.threshold}`;
  container.appendChild(duplicatesHeading);

  const suggestions = document.createElement("ul");
  suggestions.className = "duplicate-suggestions";
  if (state.duplicates.length === 0) {
    const empty = document.createElement("li");
    empty.className = "empty-state";
    empty.textContent = "No duplicate suggestions.";
    suggestions.appendChild(empty);
  }
  for (const pair of state.duplicates) {
    const item = document.createElement("li");
    item.dataset.pair = `${pair.a.character_id}:${pair.b.character_id}`;
    const label = document.createElement("span");
    label.textContent = `${pair.a.preferred_name} / ${pair.b.preferred_name} (score ${pair.score.toFixed(2)}) `;
    item.appendChild(label);
    // Keep the longer preferred name; the other character is absorbed.
    const [keep, drop] =
      pair.a.preferred_name.length >= pair.b.preferred_name.length ? [pair.a, pair.b] : [pair.b, pair.a];
    const mergeButton = document.createElement("button");
    mergeButton.type = "button";
    mergeButton.textContent = `Merge into ${keep.preferred_name}`;
    mergeButton.addEventListener("click", () => handlers.onMerge(keep.character_id, drop.character_id));
    item.appendChild(mergeButton);
    suggestions.appendChild(item);
  }
  container.appendChild(suggestions);
}

export async function mergeCharactersWithFeedback(
  api: ApiClient,
  container: HTMLElement,
  keepId: string,
  dropId: string,
): Promise<Character | null> {
  try {
    return await api.mergeCharacters(keepId, dropId);
  } catch (error) {
    const message = document.createElement("p");
    message.className = "field-error";
    message.textContent = error instanceof ApiError ? `${error.status}: ${error.message}` : String(error);
    container.prepend(message);
    return null;
  }
}
