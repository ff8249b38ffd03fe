/** Drives the real UI logic against the real review API: a seeded store with
 * 3 systems x 10 items, served by the Python backend over HTTP. */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { DuplicateJudgmentError, ReviewApiClient } from "../src/api.js";
import { choicesFor, renderItem } from "../src/render.js";
import { SessionController, type SessionView } from "../src/session.js";
import type { JudgmentValue } from "../src/types.js";

const SYSTEMS = ["sysalpha", "sysbeta", "sysgamma"] as const;
const REPLACEMENTS: Record<(typeof SYSTEMS)[number], string> = {
  sysalpha: "flat",
  sysbeta: "weak",
  sysgamma: "dull",
};
const SAMPLES = 10;
// per evaluator: 10 original validity + 30 validity + 30 suspiciousness + 10x3 dgm
const EXPECTED_JUDGMENTS = 100;

const PORT = 8100 + Math.floor(Math.random() * 800);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let workdir = "";

function recordLine(sampleId: string, system: (typeof SYSTEMS)[number]): string {
  const original = `sample ${sampleId} keeps the film steady and fine throughout the long night`;
  const adversarial = original.replace("fine", REPLACEMENTS[system]);
  return JSON.stringify({
    schema: "attack_record/1",
    sample_id: sampleId,
    original_text: original,
    adversarial_text: adversarial,
    outcome: "success",
    edits: [{ position: 7, original: "fine", replacement: REPLACEMENTS[system] }],
    victim_queries: 9,
    llm_queries: 1,
    steps: [],
    gold_label: 1,
    diagnostic: null,
  });
}

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/tallies`);
      if (resp.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("review API did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "review-ui-"));
  const recordArgs: string[] = [];
  for (const system of SYSTEMS) {
    const path = join(workdir, `${system}.jsonl`);
    const lines = Array.from({ length: SAMPLES }, (_, i) =>
      recordLine(`s${String(i).padStart(2, "0")}`, system),
    );
    writeFileSync(path, lines.join("\n") + "\n");
    recordArgs.push(`${system}=${path}`);
  }
  server = spawn(
    "python3",
    [
      "-m", "advswap.cli", "review-serve",
      "--records", ...recordArgs,
      "--labels", "negative,positive",
      "--judgments", join(workdir, "judgments.jsonl"),
      "--shuffle-seed", "7",
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

function firstChoice(view: SessionView): JudgmentValue {
  if (!view.item || !view.dimension) {
    throw new Error("no active item");
  }
  const choice = choicesFor(view.item, view.dimension)[0];
  if (!choice) {
    throw new Error("no choices rendered");
  }
  return JSON.parse(choice.value) as JudgmentValue;
}

async function driveSession(
  evaluator: string,
  snapshots: string[],
  stopAfter = Infinity,
): Promise<SessionController> {
  const api = new ReviewApiClient(BASE);
  const controller = new SessionController(api, evaluator, (view) => {
    if (view.item && view.dimension) {
      snapshots.push(renderItem(view.item, view.dimension));
    }
  });
  await controller.start();
  let submitted = 0;
  while (!controller.view().done && submitted < stopAfter) {
    await controller.choose(firstChoice(controller.view()));
    submitted += 1;
  }
  return controller;
}

describe("blind round-trip against the live review API", () => {
  it("persists every judgment exactly once, blind, with resume", async () => {
    const snapshots: string[] = [];

    // first evaluator works straight through
    const done = await driveSession("eva-one", snapshots);
    expect(done.view().done).toBe(true);
    expect(done.view().progress).toEqual({
      judged: EXPECTED_JUDGMENTS,
      total: EXPECTED_JUDGMENTS,
    });

    // second evaluator stops mid-session and resumes in a fresh controller,
    // as after a page reload
    const partial = await driveSession("eva-two", snapshots, 17);
    const beforeResume = partial.view();
    expect(beforeResume.done).toBe(false);

    const resumed = new SessionController(
      new ReviewApiClient(BASE),
      "eva-two",
      (view) => {
        if (view.item && view.dimension) {
          snapshots.push(renderItem(view.item, view.dimension));
        }
      },
    );
    await resumed.start();
    // resume lands exactly where the interrupted session stood
    expect(resumed.view().item?.item_id).toBe(beforeResume.item?.item_id);
    expect(resumed.view().dimension).toBe(beforeResume.dimension);
    while (!resumed.view().done) {
      await resumed.choose(firstChoice(resumed.view()));
    }
    expect(resumed.view().progress.judged).toBe(EXPECTED_JUDGMENTS);

    // exactly once: the persisted journal has one line per
    // (evaluator, item, dimension) and the expected grand total
    const journal = readFileSync(join(workdir, "judgments.jsonl"), "utf-8")
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as { evaluator: string; item_id: string; dimension: string });
    expect(journal).toHaveLength(2 * EXPECTED_JUDGMENTS);
    const keys = journal.map((j) => `${j.evaluator}|${j.item_id}|${j.dimension}`);
    expect(new Set(keys).size).toBe(journal.length);

    // duplicate resubmission is rejected with 409
    const validityEntry = journal.find((j) => j.dimension === "validity")!;
    const api = new ReviewApiClient(BASE);
    await expect(
      api.submitJudgment(
        validityEntry.evaluator,
        validityEntry.item_id,
        "validity",
        { label: 0 },
      ),
    ).rejects.toBeInstanceOf(DuplicateJudgmentError);

    // blindness: no rendered snapshot names any system
    expect(snapshots.length).toBeGreaterThan(100);
    const blob = snapshots.join("\n");
    for (const system of SYSTEMS) {
      expect(blob).not.toContain(system);
    }

    // the tallies (researcher view) do aggregate per system
    const tallies = (await api.tallies()) as {
      judgment_count: number;
      dgm: Record<string, Record<string, number>>;
      validity: Record<string, number>;
    };
    expect(tallies.judgment_count).toBe(2 * EXPECTED_JUDGMENTS);
    expect(tallies.validity["original"]).toBeDefined();
    for (const system of SYSTEMS) {
      expect(tallies.dgm["detectability"]?.[system]).toBeDefined();
    }
  }, 120_000);
});
