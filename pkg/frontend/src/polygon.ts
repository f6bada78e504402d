/**
 * Drawing state for exactly one polygon.  Click to add vertices, click the
 * first vertex again to close, undo pops the last vertex (or re-opens a
 * closed polygon).  The client only ever ships the vertex list; rasterization
 * authority stays with the server.
 */

export type Vertex = [number, number];

export const CLOSE_RADIUS = 8; // screen px; callers rescale to image units

export class PolygonDraft {
    vertices: Vertex[] = [];
    closed = false;

    /** closeRadius is in image coordinates; the DOM layer rescales it so the
     *  click target stays ~8 screen pixels regardless of zoom. */
    constructor(public closeRadius: number = CLOSE_RADIUS) {}

    /** Add a vertex, or close the polygon when clicking near the first one. */
    addPoint(x: number, y: number): void {
        if (this.closed) {
            return; // one polygon only; undo to edit again
        }
        if (this.vertices.length >= 3 && this.nearFirstVertex(x, y)) {
            this.closed = true;
            return;
        }
        this.vertices.push([x, y]);
    }

    nearFirstVertex(x: number, y: number): boolean {
        if (this.vertices.length === 0) {
            return false;
        }
        const [fx, fy] = this.vertices[0];
        return Math.hypot(x - fx, y - fy) <= this.closeRadius;
    }

    /** Undo the last action: re-open a closed polygon, else drop a vertex. */
    undo(): void {
        if (this.closed) {
            this.closed = false;
            return;
        }
        this.vertices.pop();
    }

    reset(): void {
        this.vertices = [];
        this.closed = false;
    }

    get canClose(): boolean {
        return !this.closed && this.vertices.length >= 3;
    }

    /** Submission needs a closed polygon with at least three vertices. */
    get canSubmit(): boolean {
        return this.closed && this.vertices.length >= 3;
    }

    /** Vertex list payload for POST /tasks/{id}/segmentation. */
    payload(): Vertex[] {
        return this.vertices.map(([x, y]) => [x, y]);
    }
}

/**
 * Even-odd point-in-polygon test used only for the live preview fill, so the
 * worker sees the same rule the server rasterizes with.
 */
export function insideEvenOdd(x: number, y: number, vertices: Vertex[]): boolean {
    let inside = false;
    const n = vertices.length;
    for (let i = 0; i < n; i++) {
        const [x1, y1] = vertices[i];
        const [x2, y2] = vertices[(i + 1) % n];
        if ((y1 > y) !== (y2 > y)) {
            const xCross = x1 + ((y - y1) / (y2 - y1)) * (x2 - x1);
            if (x < xCross) {
                inside = !inside;
            }
        }
    }
    return inside;
}
