// Scripted 180-stimulus session against the live Python service: the
// offline-scored response log must equal the service report byte for
// byte, duplicates must be rejected, and no captured payload may carry
// truth labels.

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { StudyApi } from "../src/api.js";
import { SessionController } from "../src/session.js";

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;
const FORBIDDEN = ["truth", "SYNTHETIC", '"REAL"', "model_family", "model_key", "source_dataset", "SRC1", "GEN1"];

let studyDir: string;
let server: ChildProcess | undefined;
const captured: string[] = [];

const capturingFetch: typeof fetch = async (input, init) => {
  const res = await fetch(input, init);
  const clone = res.clone();
  const text = await clone.text();
  captured.push(text);
  return res;
};

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/api/session/_probe`);
      if (res.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 300));
  }
  throw new Error("study service did not come up");
}

beforeAll(async () => {
  studyDir = mkdtempSync(join(tmpdir(), "study-"));
  const build = spawnSync("python3", ["-m", "densaug.reader_study.demo", studyDir, "0"], {
    stdio: "inherit",
    timeout: 180_000,
  });
  expect(build.status).toBe(0);
  server = spawn(
    "python3",
    ["-m", "densaug.cli", "study", "serve", "--study-dir", studyDir, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 240_000);

afterAll(() => {
  server?.kill();
});

describe("browser client against the live service", () => {
  it("runs a full 180-stimulus session and matches the offline report", async () => {
    const api = new StudyApi(BASE, capturingFetch);
    const controller = new SessionController(api, "scripted-reader");
    await controller.start();

    let guard = 0;
    const seen: string[] = [];
    while (controller.state.phase === "answering" && guard < 500) {
      guard += 1;
      const stimulus = controller.state.stimulus!;
      seen.push(stimulus.id);
      // image must be fetchable exactly as the client would load it
      const image = await fetch(api.imageUrl(stimulus.image_url));
      expect(image.status).toBe(200);
      controller.select((guard % 6) + 1);
      const advanced = await controller.submit();
      expect(advanced).toBe(true);
    }
    expect(controller.state.phase).toBe("complete");
    expect(seen).toHaveLength(180);
    expect(new Set(seen).size).toBe(180);

    // duplicate submission of an already-answered stimulus is rejected (409 -> duplicate)
    const dup = await api.submit("scripted-reader", seen[0], 3);
    expect(dup.status).toBe("duplicate");

    // served report equals offline scoring of the persisted response log
    const served = await (await fetch(`${BASE}/api/report`)).text();
    const reportPath = join(studyDir, "offline_report.csv");
    const offline = spawnSync(
      "python3",
      ["-m", "densaug.cli", "study", "report", "--study-dir", studyDir, "--out", reportPath],
      { stdio: "inherit", timeout: 120_000 },
    );
    expect(offline.status).toBe(0);
    expect(readFileSync(reportPath, "utf-8")).toBe(served);
    expect(served.split("\n")[0]).toMatch(/^reader,/);
  }, 300_000);

  it("captured no truth labels in any network payload", () => {
    expect(captured.length).toBeGreaterThan(300);
    for (const payload of captured) {
      for (const token of FORBIDDEN) {
        expect(payload).not.toContain(token);
      }
    }
  });
});
