/**
 * Temporary-credential screen: add copy buttons next to the one-time pair.
 * The values are shown exactly once by the server; copying beats
 * retyping them on a phone.
 */

export function enhanceForgot(root: Document | HTMLElement): void {
  for (const id of ["temp-username", "temp-password"]) {
    const span = root.querySelector<HTMLElement>(`#${id}`);
    if (!span || span.nextElementSibling?.classList.contains("copy-btn")) continue;
    const button = span.ownerDocument.createElement("button");
    button.type = "button";
    button.className = "copy-btn";
    button.textContent = "copy";
    button.style.marginLeft = "0.5rem";
    button.addEventListener("click", async () => {
      await navigator.clipboard.writeText(span.textContent ?? "");
      button.textContent = "copied";
    });
    span.after(button);
  }
}
