/**
 * Typed client for the collection service.  Submissions are idempotent-keyed
 * by task_id on the client side: once a submission for a task is in flight or
 * acknowledged, repeat calls return the original promise instead of posting
 * again, so double-clicks cannot double-submit.
 */

import type { ApiError, SegmentationAck, TaskView, VoteAck } from "./types.js";
import type { Vertex } from "./polygon.js";

type Vote01 = 0 | 1;

export class ServiceError extends Error {
    constructor(public readonly kind: string, detail: string, public readonly status: number) {
        super(detail);
    }
}

async function parseError(response: Response): Promise<never> {
    let kind = "HttpError";
    let detail = `${response.status} ${response.statusText}`;
    try {
        const body = (await response.json()) as Partial<ApiError>;
        if (body.error) {
            kind = body.error;
            detail = body.detail ?? detail;
        }
    } catch {
        // non-JSON error body; keep the status line
    }
    throw new ServiceError(kind, detail, response.status);
}

export class ApiClient {
    private submissions = new Map<string, Promise<unknown>>();

    constructor(private readonly baseUrl: string = "") {}

    async nextTask(worker: string): Promise<TaskView | null> {
        const response = await fetch(
            `${this.baseUrl}/tasks/next?worker=${encodeURIComponent(worker)}`,
        );
        if (!response.ok) {
            await parseError(response);
        }
        const body = (await response.json()) as { task: TaskView | null };
        return body.task;
    }

    submitVote(taskId: string, worker: string, votes: Vote01[]): Promise<VoteAck> {
        return this.submitOnce(taskId, () =>
            this.post<VoteAck>(`/tasks/${taskId}/vote`, { worker, votes }),
        );
    }

    submitSegmentation(
        taskId: string,
        worker: string,
        polygon: Vertex[],
    ): Promise<SegmentationAck> {
        return this.submitOnce(taskId, () =>
            this.post<SegmentationAck>(`/tasks/${taskId}/segmentation`, { worker, polygon }),
        );
    }

    /** One in-flight/settled submission per task id. */
    private submitOnce<T>(taskId: string, send: () => Promise<T>): Promise<T> {
        const existing = this.submissions.get(taskId);
        if (existing) {
            return existing as Promise<T>;
        }
        const promise = send().catch((err) => {
            this.submissions.delete(taskId); // failed submissions may retry
            throw err;
        });
        this.submissions.set(taskId, promise);
        return promise;
    }

    private async post<T>(path: string, body: unknown): Promise<T> {
        const response = await fetch(`${this.baseUrl}${path}`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!response.ok) {
            await parseError(response);
        }
        return (await response.json()) as T;
    }
}
