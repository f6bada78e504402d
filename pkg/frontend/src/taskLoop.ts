/**
 * Fetch/render/submit cycle.  The loop owns no DOM; renderers receive the
 * task plus a submit function and resolve when the worker finishes.  Network
 * failures surface through onError and the current task is re-rendered with
 * its state intact, so selections and half-drawn polygons survive retries.
 */

import { ApiClient, ServiceError } from "./api.js";
import type { SegmentationAck, TaskView, VoteAck } from "./types.js";
import type { Vertex } from "./polygon.js";

export interface LoopHooks {
    renderVote: (task: TaskView, submit: (votes: (0 | 1)[]) => Promise<VoteAck>) => Promise<void>;
    renderSegment: (
        task: TaskView,
        submit: (polygon: Vertex[]) => Promise<SegmentationAck>,
    ) => Promise<void>;
    onIdle: () => void;
    onError: (message: string) => void;
}

export class TaskLoop {
    private stopped = false;

    constructor(
        private readonly api: ApiClient,
        private readonly worker: string,
        private readonly hooks: LoopHooks,
    ) {}

    stop(): void {
        this.stopped = true;
    }

    /** Run until the queue is empty or stop() is called. */
    async run(): Promise<number> {
        let completed = 0;
        while (!this.stopped) {
            let task: TaskView | null;
            try {
                task = await this.api.nextTask(this.worker);
            } catch (err) {
                // eligibility rejections are final; show the server's words
                this.hooks.onError(messageOf(err));
                return completed;
            }
            if (task === null) {
                this.hooks.onIdle();
                return completed;
            }
            try {
                if (task.kind === "vote") {
                    await this.hooks.renderVote(task, (votes) =>
                        this.api.submitVote(task!.task_id, this.worker, votes),
                    );
                } else {
                    await this.hooks.renderSegment(task, (polygon) =>
                        this.api.submitSegmentation(task!.task_id, this.worker, polygon),
                    );
                }
                completed += 1;
            } catch (err) {
                this.hooks.onError(messageOf(err));
                return completed;
            }
        }
        return completed;
    }
}

export function messageOf(err: unknown): string {
    if (err instanceof ServiceError) {
        return `${err.kind}: ${err.message}`;
    }
    return err instanceof Error ? err.message : String(err);
}
