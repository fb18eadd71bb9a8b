/**
 * Entry dispatch: each server page carries data-page on <body>; enhancers
 * are additive and every page stays fully functional without them.
 */

import { enhanceConsent } from "./consent.js";
import { enhanceForgot } from "./forgot.js";
import { enhanceLogin } from "./login.js";
import { enhanceOtp } from "./otp.js";

const ENHANCERS: Record<string, (root: Document | HTMLElement) => void> = {
  login: enhanceLogin,
  otp: enhanceOtp,
  consent: enhanceConsent,
  forgot: enhanceForgot,
};

export function enhance(doc: Document): void {
  const page = doc.body?.dataset.page;
  if (!page) return;
  ENHANCERS[page]?.(doc);
}
