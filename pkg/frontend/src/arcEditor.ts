import { ApiClient, ApiError } from "./api.js";
import type { Arc, EpisodeRef } from "./types.js";
import { episodeLabel } from "./types.js";

/** Map violation codes to the form field that should show the message. */
const FIELD_FOR_CODE: Record<string, string> = {
  EMPTY_TITLE: "title",
  EMPTY_DESCRIPTION: "description",
  NO_MAIN_CHARACTERS: "main_characters",
  UNKNOWN_CHARACTER: "main_characters",
  ANTHOLOGY_MULTI_EPISODE: "arc_type",
};

function fieldError(form: HTMLElement, field: string, message: string): void {
  const slot = form.querySelector<HTMLElement>(`[data-error-for="${field}"]`);
  if (slot) slot.textContent = message;
}

function clearErrors(form: HTMLElement): void {
  for (const slot of form.querySelectorAll<HTMLElement>("[data-error-for]")) slot.textContent = "";
}

export function renderViolations(form: HTMLElement, error: ApiError): void {
  clearErrors(form);
  for (const violation of error.violations) {
    const field = FIELD_FOR_CODE[violation.code] ?? "form";
    fieldError(form, field, `${violation.code}: ${violation.message}`);
  }
  if (error.violations.length === 0) fieldError(form, "form", error.message);
}

export interface ArcEditorOptions {
  arc: Arc;
  api: ApiClient;
  onSaved: (arc: Arc) => void;
  onClosed?: () => void;
}

/** Edit dialog: title, description, type. Submits a PATCH; violation codes
 * render as field-level messages and nothing mutates on 400. */
export function openArcEditor(root: HTMLElement, options: ArcEditorOptions): HTMLElement {
  const { arc, api } = options;
  const dialog = document.createElement("div");
  dialog.className = "dialog arc-editor";
  dialog.innerHTML = `
    <h3>Edit arc</h3>
    <label>Title <input name="title"></label>
    <p class="field-error" data-error-for="title"></p>
    <label>Description <textarea name="description"></textarea></label>
    <p class="field-error" data-error-for="description"></p>
    <label>Type
      <select name="arc_type">
        <option value="anthology">anthology</option>
        <option value="soap">soap</option>
        <option value="genre_specific">genre-specific</option>
      </select>
    </label>
    <p class="field-error" data-error-for="arc_type"></p>
    <p class="field-error" data-error-for="main_characters"></p>
    <p class="field-error" data-error-for="form"></p>
    <div class="dialog-actions">
      <button type="button" data-action="save">Save</button>
      <button type="button" data-action="cancel">Cancel</button>
    </div>
  `;
  const title = dialog.querySelector<HTMLInputElement>('input[name="title"]')!;
  const description = dialog.querySelector<HTMLTextAreaElement>('textarea[name="description"]')!;
  const arcType = dialog.querySelector<HTMLSelectElement>('select[name="arc_type"]')!;
  title.value = arc.title;
  description.value = arc.description;
  arcType.value = arc.arc_type;

  dialog.querySelector('[data-action="cancel"]')!.addEventListener("click", () => {
    dialog.remove();
    options.onClosed?.();
  });
  dialog.querySelector('[data-action="save"]')!.addEventListener("click", async () => {
    clearErrors(dialog);
    try {
      const saved = await api.patchArc(arc.arc_id, {
        title: title.value,
        description: description.value,
        arc_type: arcType.value as Arc["arc_type"],
      });
      dialog.remove();
      options.onSaved(saved);
    } catch (error) {
      if (error instanceof ApiError) renderViolations(dialog, error);
      else fieldError(dialog, "form", String(error));
    }
  });

  root.appendChild(dialog);
  return dialog;
}

export interface MergeDialogOptions {
  keep: Arc;
  absorb: Arc;
  api: ApiClient;
  onMerged: (merged: Arc) => void;
  onClosed?: () => void;
}

function arcSummary(arc: Arc): string {
  const episodes = arc.progressions.map((p) => episodeLabel(p.episode)).join(", ") || "no episodes";
  return `${arc.title}\n[${arc.arc_type}] ${episodes}\n${arc.description}`;
}

/** Side-by-side comparison with an explicit confirm; the absorbed arc is
 * gone from the server after a successful merge. */
export function openMergeDialog(root: HTMLElement, options: MergeDialogOptions): HTMLElement {
  const dialog = document.createElement("div");
  dialog.className = "dialog merge-dialog";
  dialog.innerHTML = `
    <h3>Merge arcs</h3>
    <div class="merge-compare">
      <pre class="merge-side keep"></pre>
      <pre class="merge-side absorb"></pre>
    </div>
    <p class="field-error" data-error-for="form"></p>
    <div class="dialog-actions">
      <button type="button" data-action="confirm">Merge into kept arc</button>
      <button type="button" data-action="cancel">Cancel</button>
    </div>
  `;
  dialog.querySelector<HTMLElement>(".merge-side.keep")!.textContent = `KEEP\n${arcSummary(options.keep)}`;
  dialog.querySelector<HTMLElement>(".merge-side.absorb")!.textContent = `ABSORB\n${arcSummary(options.absorb)}`;

  dialog.querySelector('[data-action="cancel"]')!.addEventListener("click", () => {
    dialog.remove();
    options.onClosed?.();
  });
  dialog.querySelector('[data-action="confirm"]')!.addEventListener("click", async () => {
    try {
      const merged = await options.api.mergeArcs(options.keep.arc_id, options.absorb.arc_id);
      dialog.remove();
      options.onMerged(merged);
    } catch (error) {
      if (error instanceof ApiError) renderViolations(dialog, error);
      else fieldError(dialog, "form", String(error));
    }
  });

  root.appendChild(dialog);
  return dialog;
}

export interface GenerateDialogOptions {
  arc: Arc;
  episode: EpisodeRef;
  api: ApiClient;
  onSaved: (arc: Arc) => void;
}

/** Drafted utterances are shown for confirmation before anything saves. */
export async function openGenerateDialog(root: HTMLElement, options: GenerateDialogOptions): Promise<HTMLElement> {
  const draft = await options.api.generateProgression(options.arc.arc_id, options.episode);
  const dialog = document.createElement("div");
  dialog.className = "dialog generate-dialog";
  dialog.innerHTML = `
    <h3>Drafted progression for ${episodeLabel(options.episode)}</h3>
    <ol class="drafted"></ol>
    <p class="field-error" data-error-for="form"></p>
    <div class="dialog-actions">
      <button type="button" data-action="confirm">Save progression</button>
      <button type="button" data-action="cancel">Discard</button>
    </div>
  `;
  const list = dialog.querySelector<HTMLElement>(".drafted")!;
  for (const utterance of draft.content) {
    const item = document.createElement("li");
    item.textContent = utterance;
    list.appendChild(item);
  }
  dialog.querySelector('[data-action="cancel"]')!.addEventListener("click", () => dialog.remove());
  dialog.querySelector('[data-action="confirm"]')!.addEventListener("click", async () => {
    try {
      const saved = await options.api.addProgression(options.arc.arc_id, {
        episode: options.episode,
        content: draft.content,
        interfering_characters: [],
      });
      dialog.remove();
      options.onSaved(saved);
    } catch (error) {
      if (error instanceof ApiError) renderViolations(dialog, error);
      else fieldError(dialog, "form", String(error));
    }
  });
  root.appendChild(dialog);
  return dialog;
}
