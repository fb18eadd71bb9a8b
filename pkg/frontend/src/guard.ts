/**
 * Single-submit guard: after the first accepted submit, every control in
 * the guarded forms is disabled so a second tap can never fire. The server
 * rejects replays anyway; this keeps the UI honest about it.
 */

export interface GuardState {
  submitted: boolean;
}

export function guardForms(forms: HTMLFormElement[]): GuardState {
  const state: GuardState = { submitted: false };
  for (const form of forms) {
    form.addEventListener("submit", (event) => {
      if (state.submitted) {
        event.preventDefault();
        return;
      }
      state.submitted = true;
      // disable on the next tick so the accepted submit still carries values
      setTimeout(() => disableControls(forms), 0);
    });
  }
  return state;
}

export function disableControls(forms: HTMLFormElement[]): void {
  for (const form of forms) {
    for (const el of Array.from(form.elements)) {
      if (
        el instanceof HTMLButtonElement ||
        el instanceof HTMLInputElement
      ) {
        el.disabled = true;
      }
    }
  }
}

/** Submit a form programmatically, falling back to a synthetic event where
 * requestSubmit is unavailable (jsdom). */
export function submitForm(form: HTMLFormElement): void {
  if (typeof form.requestSubmit === "function") {
    try {
      form.requestSubmit();
      return;
    } catch {
      // fall through to the synthetic event
    }
  }
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}
