/**
 * Consent screen: approve and deny share one single-shot guard, so after
 * either tap both controls go dead. The decision itself stays a plain
 * form post; the server is the source of truth.
 */

import { guardForms } from "./guard.js";

export function enhanceConsent(root: Document | HTMLElement): void {
  const approve = root.querySelector<HTMLFormElement>("#approve-form");
  const deny = root.querySelector<HTMLFormElement>("#deny-form");
  if (!approve || !deny) return;
  guardForms([approve, deny]);
}
