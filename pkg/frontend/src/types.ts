export type TaskKind = "vote" | "segment";

export interface TaskView {
    task_id: string;
    batch_id: string;
    kind: TaskKind;
    image_ids: string[];
    images: string[];      // URLs served by the collection service
    question?: string;     // verbatim prompt for vote tasks
}

export interface ApiError {
    error: string;   // server-side error class name
    detail: string;
}

export interface SegmentationAck {
    task_id: string;
    state: string;
    mask: { w: number; h: number; runs: number[] };
}

export interface VoteAck {
    task_id: string;
    state: string;
}
