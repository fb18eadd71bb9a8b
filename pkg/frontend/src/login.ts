/**
 * Login screen: trim the username, block submits with no session token
 * (restart guidance instead of a doomed post), and prevent double submits.
 */

import { guardForms } from "./guard.js";

export function enhanceLogin(root: Document | HTMLElement): void {
  const form = root.querySelector<HTMLFormElement>("#login-form");
  if (!form) return;
  guardForms([form]);
  form.addEventListener("submit", (event) => {
    const username = form.querySelector<HTMLInputElement>("#username");
    if (username) username.value = username.value.trim();
    const session = form.querySelector<HTMLInputElement>('input[name="session"]');
    if (!session || !session.value) {
      event.preventDefault();
      showRestartNotice(form);
    }
  });
}

function showRestartNotice(form: HTMLFormElement): void {
  if (form.querySelector(".alert")) return;
  const alert = form.ownerDocument.createElement("div");
  alert.className = "alert";
  alert.id = "session-missing";
  alert.textContent =
    "This page was opened without an active request. " +
    "Restart from your bank portal.";
  form.prepend(alert);
}
