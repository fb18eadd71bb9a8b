/**
 * DOM fixtures mirroring the server-rendered pages (same ids, names, and
 * data-page markers). The e2e test drives the real server and catches any
 * drift between these fixtures and the live markup.
 */

export function loginPage(session = "sess123"): string {
  return `
<body data-page="login">
  <div class="card">
    <h1>Credit Bureau Sign In</h1>
    <form method="post" action="/login" id="login-form">
      <input type="hidden" name="session" value="${session}">
      <input id="username" name="username" required>
      <input id="password" name="password" type="password" required>
      <button type="submit" class="primary">Sign in</button>
    </form>
    <form method="post" action="/forgot">
      <input type="hidden" name="session" value="${session}">
      <button type="submit" id="forgot-link">Forgot password?</button>
    </form>
  </div>
</body>`;
}

export function otpPage(session = "sess123"): string {
  return `
<body data-page="otp">
  <div class="card">
    <form method="post" action="/mfa" id="otp-form">
      <input type="hidden" name="session" value="${session}">
      <input id="otp" name="otp" inputmode="numeric" maxlength="6" required>
      <button type="submit" class="primary">Verify</button>
    </form>
  </div>
</body>`;
}

export function consentPage(session = "sess123"): string {
  return `
<body data-page="consent">
  <div class="card">
    <h1>Authorization Request</h1>
    <ul class="scopes" id="scope-list">
      <li>Your email address</li>
      <li>Your credit score</li>
    </ul>
    <div class="row">
      <form method="post" action="/consent" id="approve-form">
        <input type="hidden" name="session" value="${session}">
        <input type="hidden" name="decision" value="approve">
        <button type="submit" class="primary" id="approve-button">Approve</button>
      </form>
      <form method="post" action="/consent" id="deny-form">
        <input type="hidden" name="session" value="${session}">
        <input type="hidden" name="decision" value="deny">
        <button type="submit" class="danger" id="deny-button">Deny</button>
      </form>
    </div>
  </div>
</body>`;
}

export function forgotPage(): string {
  return `
<body data-page="forgot">
  <div class="card">
    <div class="note">
      Username: <span class="mono" id="temp-username">temp_ab12cd34</span><br>
      Password: <span class="mono" id="temp-password">p-9xYz_Qq7</span>
    </div>
    <a href="/login?session=sess123" id="back-to-login">Back to sign in</a>
  </div>
</body>`;
}

export function mount(html: string): Document {
  document.documentElement.innerHTML = html;
  return document;
}

/** Count accepted submit events across forms. Attach AFTER enhancement so
 * the guard's listener has already run; replays it blocked arrive here with
 * defaultPrevented set and are not counted. */
export function trackSubmits(forms: HTMLFormElement[]): () => number {
  let accepted = 0;
  for (const form of forms) {
    form.addEventListener("submit", (event) => {
      if (!event.defaultPrevented) accepted += 1;
      event.preventDefault(); // jsdom cannot navigate; swallow it
    });
  }
  return () => accepted;
}
