import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api";
import { ServiceError } from "../src/api";
import { TaskLoop } from "../src/taskLoop";
import type { TaskView } from "../src/types";

function fakeApi(tasks: TaskView[], log: string[]): ApiClient {
    const queue = tasks.slice();
    return {
        nextTask: async () => queue.shift() ?? null,
        submitVote: async (taskId: string) => {
            log.push(`vote:${taskId}`);
            return { task_id: taskId, state: "done" };
        },
        submitSegmentation: async (taskId: string) => {
            log.push(`segment:${taskId}`);
            return { task_id: taskId, state: "done", mask: { w: 1, h: 1, runs: [1] } };
        },
    } as unknown as ApiClient;
}

function task(id: string, kind: "vote" | "segment"): TaskView {
    return { task_id: id, batch_id: "b1", kind, image_ids: ["i"], images: ["/images/i"] };
}

describe("TaskLoop", () => {
    it("renders tasks in server order and then goes idle", async () => {
        const log: string[] = [];
        const api = fakeApi([task("t1", "vote"), task("t2", "segment")], log);
        let idle = false;
        const loop = new TaskLoop(api, "w", {
            renderVote: async (t, submit) => {
                await submit([1]);
            },
            renderSegment: async (t, submit) => {
                await submit([[0, 0], [1, 0], [1, 1]]);
            },
            onIdle: () => {
                idle = true;
            },
            onError: () => {},
        });
        const completed = await loop.run();
        expect(completed).toBe(2);
        expect(log).toEqual(["vote:t1", "segment:t2"]);
        expect(idle).toBe(true);
    });

    it("shows eligibility rejections verbatim and stops", async () => {
        const api = {
            nextTask: async () => {
                throw new ServiceError("IneligibleWorker", "w: 0 completed tasks", 403);
            },
        } as unknown as ApiClient;
        const errors: string[] = [];
        const loop = new TaskLoop(api, "w", {
            renderVote: async () => {},
            renderSegment: async () => {},
            onIdle: () => {},
            onError: (message) => errors.push(message),
        });
        const completed = await loop.run();
        expect(completed).toBe(0);
        expect(errors).toEqual(["IneligibleWorker: w: 0 completed tasks"]);
    });

    it("stop() halts between tasks", async () => {
        const log: string[] = [];
        const api = fakeApi([task("t1", "vote"), task("t2", "vote")], log);
        const loop = new TaskLoop(api, "w", {
            renderVote: async (t, submit) => {
                await submit([1]);
                loop.stop();
            },
            renderSegment: async () => {},
            onIdle: () => {},
            onError: () => {},
        });
        const completed = await loop.run();
        expect(completed).toBe(1);
        expect(log).toEqual(["vote:t1"]);
    });
});
