// @vitest-environment node
/**
 * Drives the real stack over HTTP: login, consent with both scopes listed,
 * approve redirecting to the bank callback with code and state, deny
 * showing the denial page with no token obtainable afterwards, and a
 * working forgot-password pair.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { once } from "node:events";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

const repoRoot = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "..",
);

let server: ChildProcess;
let base = "";

async function waitForBase(proc: ChildProcess): Promise<string> {
  return new Promise((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(
      () => reject(new Error(`server did not start:\n${buffer}`)),
      20000,
    );
    proc.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/serving on (http:\/\/[\d.:]+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]!);
      }
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited with ${code}:\n${buffer}`));
    });
  });
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "creditconsent", "serve", "--port", "0"],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  base = await waitForBase(server);
});

afterAll(async () => {
  if (server && !server.killed) {
    server.kill("SIGINT");
    await Promise.race([once(server, "exit"), sleep(5000)]);
    server.kill("SIGKILL");
  }
});

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

async function getManual(url: string): Promise<Response> {
  return fetch(url, { redirect: "manual" });
}

async function postForm(
  pathname: string,
  fields: Record<string, string>,
): Promise<Response> {
  return fetch(base + pathname, {
    method: "POST",
    body: new URLSearchParams(fields),
    redirect: "manual",
  });
}

async function walkToConsent(): Promise<{ session: string; state: string }> {
  const start = (await (await fetch(`${base}/client/start`)).json()) as {
    authorize_url: string;
    state: string;
  };
  const authorize = await getManual(start.authorize_url);
  expect(authorize.status).toBe(302);
  const loginUrl = new URL(authorize.headers.get("location")!, base);
  const session = loginUrl.searchParams.get("session")!;
  const loginPage = await fetch(loginUrl);
  expect(await loginPage.text()).toContain('id="login-form"');
  const login = await postForm("/login", {
    session,
    username: "demo_user",
    password: "demo_password",
  });
  expect(login.status).toBe(302);
  expect(login.headers.get("location")).toBe(`/consent?session=${session}`);
  return { session, state: start.state };
}

describe("end-to-end UI flow", () => {
  it("approve: login, scope review, redirect to the bank with code and state", async () => {
    const { session, state } = await walkToConsent();
    const consent = await fetch(`${base}/consent?session=${session}`);
    const page = await consent.text();
    expect(page).toContain("Your email address");
    expect(page).toContain("Your credit score");
    expect(page).toContain('id="approve-button"');
    expect(page).toContain('id="deny-button"');

    const decision = await postForm("/consent", { session, decision: "approve" });
    expect(decision.status).toBe(302);
    const callback = new URL(decision.headers.get("location")!);
    expect(callback.pathname).toBe("/client/callback");
    expect(callback.searchParams.get("state")).toBe(state);
    expect(callback.searchParams.get("code")).toMatch(/^[0-9a-f]{8,}$/);

    const result = (await (await fetch(callback)).json()) as {
      status: string;
      report: { credit_score: number };
    };
    expect(result.status).toBe("Completed");
    expect(result.report.credit_score).toBe(732);
  });

  it("deny: denial page, and no token can be obtained for the session", async () => {
    const { session } = await walkToConsent();
    await fetch(`${base}/consent?session=${session}`);
    const decision = await postForm("/consent", { session, decision: "deny" });
    expect(decision.status).toBe(200);
    const page = await decision.text();
    expect(page).toContain("No data was shared");

    const token = await fetch(`${base}/token`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        grant_type: "authorization_code",
        code: "0123456789abcdef",
        code_verifier: "v".repeat(43),
        client_id: "bank-portal",
        redirect_uri: `${base}/client/callback`,
      }),
    });
    expect(token.status).toBe(400);
    expect(await token.json()).toEqual({ error: "invalid_grant" });
  });

  it("forgot password: the displayed temporary pair signs in", async () => {
    const start = (await (await fetch(`${base}/client/start`)).json()) as {
      authorize_url: string;
    };
    const authorize = await getManual(start.authorize_url);
    const loginUrl = new URL(authorize.headers.get("location")!, base);
    const session = loginUrl.searchParams.get("session")!;

    const forgot = await postForm("/forgot", { session });
    expect(forgot.status).toBe(200);
    const page = await forgot.text();
    const username = page.match(/id="temp-username">([^<]+)</)![1]!;
    const password = page.match(/id="temp-password">([^<]+)</)![1]!;

    const login = await postForm("/login", { session, username, password });
    expect(login.status).toBe(302);
    expect(login.headers.get("location")).toBe(`/consent?session=${session}`);
  });

  it("serves the built consent-ui bundle when present", async () => {
    const resp = await fetch(`${base}/static/consent-ui.js`);
    // the bundle is optional; when built it must be valid module JS
    if (resp.status === 200) {
      expect(await resp.text()).toContain("enhance");
    } else {
      expect(resp.status).toBe(404);
    }
  });
});
