/**
 * OTP entry: digits only, auto-submit once six digits are present, one
 * submission per page view.
 */

import { guardForms, submitForm } from "./guard.js";

export function enhanceOtp(root: Document | HTMLElement): void {
  const form = root.querySelector<HTMLFormElement>("#otp-form");
  const input = root.querySelector<HTMLInputElement>("#otp");
  if (!form || !input) return;
  const guard = guardForms([form]);
  input.addEventListener("input", () => {
    const digits = input.value.replace(/\D/g, "").slice(0, 6);
    if (digits !== input.value) input.value = digits;
    if (digits.length === 6 && !guard.submitted) {
      submitForm(form);
    }
  });
}
