/**
 * Round trip against the real collection service: the client state machines
 * drive actual HTTP endpoints on a spawned server.  Covers the two live
 * fixtures: a rectangle polygon that must rasterize to the known 4-pixel
 * mask, and five votes that must materialise a majority label in the store.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, mkdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { PolygonDraft } from "../src/polygon";
import { VoteSheet } from "../src/voting";

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;
const WORKERS = ["alice", "bo", "cam", "dee", "eve"];

let server: ChildProcess;
let workDir: string;

function writeCorpus(dir: string): void {
    // one 4x4 image for the segmentation fixture
    mkdirSync(join(dir, "images"), { recursive: true });
    writeFileSync(join(dir, "images", "sq0.pgm"), "P2\n4 4\n255\n" + "128 ".repeat(16) + "\n");
    writeFileSync(
        join(dir, "segment.jsonl"),
        JSON.stringify({
            image_id: "sq0", width: 4, height: 4, source: "e2e", path: "images/sq0.pgm",
            votes: [], annotations: [], scores: {}, labels: {},
        }) + "\n",
    );
    // five imageless records for the voting fixture
    const voteRecords = [0, 1, 2, 3, 4].map((k) =>
        JSON.stringify({
            image_id: `v${k}`, width: 4, height: 4, source: "e2e", path: "",
            votes: [], annotations: [], scores: {}, labels: {},
        }),
    );
    writeFileSync(join(dir, "vote.jsonl"), voteRecords.join("\n") + "\n");
    const roster = Object.fromEntries(
        WORKERS.map((w) => [w, { completed_tasks: 300, approval_rate: 0.99 }]),
    );
    writeFileSync(join(dir, "workers.json"), JSON.stringify({ workers: roster }));
}

async function waitForServer(): Promise<void> {
    for (let attempt = 0; attempt < 60; attempt++) {
        try {
            const response = await fetch(`${BASE}/health`);
            if (response.ok) {
                return;
            }
        } catch {
            // not up yet
        }
        await new Promise((r) => setTimeout(r, 250));
    }
    throw new Error("server did not become healthy");
}

async function createBatch(manifest: string, kind: string, extra = 0): Promise<string> {
    const response = await fetch(`${BASE}/batches`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ manifest, kind, extra }),
    });
    expect(response.ok).toBe(true);
    const body = (await response.json()) as { batch_id: string };
    return body.batch_id;
}

beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "crowdseg-e2e-"));
    writeCorpus(workDir);
    server = spawn(
        "python3",
        ["-m", "crowdseg.cli", "serve", "--store", join(workDir, "store"),
         "--config", join(workDir, "workers.json"), "--port", String(PORT)],
        { stdio: "ignore" },
    );
    await waitForServer();
}, 30000);

afterAll(() => {
    server?.kill();
});

describe("live round trips", () => {
    it("drawn rectangle rasterizes server-side to the 4-pixel fixture mask", async () => {
        const batchId = await createBatch(join(workDir, "segment.jsonl"), "segment", 2);
        const api = new ApiClient(BASE);
        const task = await api.nextTask("alice");
        expect(task?.kind).toBe("segment");
        expect(task?.images).toEqual(["/images/sq0"]);

        // draw the unit-fixture rectangle: corners (0,0) (2,0) (2,2) (0,2)
        const draft = new PolygonDraft(0.4);
        draft.addPoint(0, 0);
        draft.addPoint(2, 0);
        draft.addPoint(2, 2);
        draft.addPoint(0, 2);
        expect(draft.canSubmit).toBe(false); // still open
        draft.addPoint(0.1, 0.1); // click the first vertex: closes
        expect(draft.canSubmit).toBe(true);

        const ack = await api.submitSegmentation(task!.task_id, "alice", draft.payload());
        expect(ack.state).toBe("done");
        // bits row-major: rows 0-1 are [1,1,0,0], rest background
        expect(ack.mask).toEqual({ w: 4, h: 4, runs: [0, 2, 2, 2, 10] });

        // double-click protection: the duplicate resolves to the same ack
        const again = await api.submitSegmentation(task!.task_id, "alice", draft.payload());
        expect(again).toEqual(ack);

        const status = await (await fetch(`${BASE}/batches/${batchId}/status`)).json();
        expect(status.annotations).toBe(1);
    }, 30000);

    it("five votes through the client materialise the majority label", async () => {
        const batchId = await createBatch(join(workDir, "vote.jsonl"), "vote");
        for (const worker of WORKERS) {
            const api = new ApiClient(BASE);
            const task = await api.nextTask(worker);
            expect(task?.kind).toBe("vote");
            expect(task?.question).toContain("all people would pick the same object");
            const sheet = new VoteSheet(task!.image_ids.length);
            // unanimous yes on the first three images, no on the last two
            task!.image_ids.forEach((_, index) => sheet.select(index, index < 3 ? 1 : 0));
            expect(sheet.complete).toBe(true);
            await api.submitVote(task!.task_id, worker, sheet.payload());
        }
        const report = await (await fetch(`${BASE}/batches/${batchId}/report`)).json();
        const labels = Object.fromEntries(
            report.images.map((row: { image_id: string; labels: Record<string, string> }) => [
                row.image_id,
                row.labels.judgers,
            ]),
        );
        expect(labels).toEqual({
            v0: "unambiguous",
            v1: "unambiguous",
            v2: "unambiguous",
            v3: "ambiguous",
            v4: "ambiguous",
        });
        const votes = report.images.map((row: { votes: number }) => row.votes);
        expect(votes).toEqual([5, 5, 5, 5, 5]);
    }, 30000);

    it("unknown workers are rejected with the server's wording", async () => {
        const api = new ApiClient(BASE);
        await expect(api.nextTask("stranger")).rejects.toMatchObject({
            kind: "IneligibleWorker",
            status: 403,
        });
    });
});
