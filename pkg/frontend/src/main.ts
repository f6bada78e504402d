/** Page wiring: worker sign-in, then the fetch/render/submit loop. */

import { ApiClient } from "./api.js";
import { CLOSE_RADIUS, PolygonDraft } from "./polygon.js";
import { TaskLoop, messageOf } from "./taskLoop.js";
import { VoteSheet } from "./voting.js";
import type { TaskView } from "./types.js";

const app = document.getElementById("app") as HTMLDivElement;

function clear(node: HTMLElement): void {
    while (node.firstChild) {
        node.removeChild(node.firstChild);
    }
}

function banner(message: string, kind: "error" | "info"): HTMLDivElement {
    const div = document.createElement("div");
    div.className = `banner ${kind}`;
    div.textContent = message;
    return div;
}

function renderVoteTask(
    task: TaskView,
    submit: (votes: (0 | 1)[]) => Promise<unknown>,
): Promise<void> {
    return new Promise((resolve) => {
        const sheet = new VoteSheet(task.image_ids.length);
        clear(app);
        const heading = document.createElement("p");
        heading.className = "question";
        heading.textContent = task.question ?? "";
        app.appendChild(heading);

        const submitButton = document.createElement("button");
        submitButton.textContent = "Submit votes";
        submitButton.disabled = true;

        task.images.forEach((url, index) => {
            const row = document.createElement("div");
            row.className = "vote-row";
            const img = document.createElement("img");
            img.src = url;
            img.alt = task.image_ids[index];
            row.appendChild(img);
            for (const [label, value] of [["Yes", 1], ["No", 0]] as const) {
                const wrap = document.createElement("label");
                const radio = document.createElement("input");
                radio.type = "radio";
                radio.name = `vote-${index}`;
                radio.addEventListener("change", () => {
                    sheet.select(index, value);
                    submitButton.disabled = !sheet.complete;
                });
                wrap.appendChild(radio);
                wrap.appendChild(document.createTextNode(label));
                row.appendChild(wrap);
            }
            app.appendChild(row);
        });

        app.appendChild(submitButton);
        submitButton.addEventListener("click", async () => {
            submitButton.disabled = true;
            try {
                await submit(sheet.payload());
                resolve();
            } catch (err) {
                // selections live in the DOM; just surface the failure
                app.insertBefore(banner(messageOf(err), "error"), heading);
                submitButton.disabled = false;
            }
        });
    });
}

function renderSegmentTask(
    task: TaskView,
    submit: (polygon: [number, number][]) => Promise<unknown>,
): Promise<void> {
    return new Promise((resolve) => {
        const draft = new PolygonDraft();
        clear(app);
        const heading = document.createElement("p");
        heading.className = "question";
        heading.textContent = "Draw the boundary of a single object. Click to add points; click the first point to close.";
        app.appendChild(heading);

        const canvas = document.createElement("canvas");
        const ctx = canvas.getContext("2d")!;
        const img = new Image();
        img.src = task.images[0];
        img.onload = () => {
            canvas.width = img.naturalWidth;
            canvas.height = img.naturalHeight;
            redraw();
        };
        app.appendChild(canvas);

        const controls = document.createElement("div");
        const undoButton = document.createElement("button");
        undoButton.textContent = "Undo";
        const submitButton = document.createElement("button");
        submitButton.textContent = "Submit segmentation";
        submitButton.disabled = true;
        controls.appendChild(undoButton);
        controls.appendChild(submitButton);
        app.appendChild(controls);

        function redraw(): void {
            ctx.clearRect(0, 0, canvas.width, canvas.height);
            ctx.drawImage(img, 0, 0);
            if (draft.vertices.length === 0) {
                return;
            }
            ctx.beginPath();
            const [x0, y0] = draft.vertices[0];
            ctx.moveTo(x0, y0);
            for (const [x, y] of draft.vertices.slice(1)) {
                ctx.lineTo(x, y);
            }
            if (draft.closed) {
                ctx.closePath();
                // same even-odd rule the server rasterizes with
                ctx.fillStyle = "rgba(220, 60, 60, 0.35)";
                ctx.fill("evenodd");
            }
            ctx.strokeStyle = "#d43c3c";
            ctx.lineWidth = 2;
            ctx.stroke();
            for (const [x, y] of draft.vertices) {
                ctx.beginPath();
                ctx.arc(x, y, 3, 0, 2 * Math.PI);
                ctx.fillStyle = "#d43c3c";
                ctx.fill();
            }
            if (!draft.closed && draft.canClose) {
                const [fx, fy] = draft.vertices[0];
                ctx.beginPath();
                ctx.arc(fx, fy, draft.closeRadius, 0, 2 * Math.PI);
                ctx.strokeStyle = "rgba(212, 60, 60, 0.6)";
                ctx.stroke();
            }
        }

        canvas.addEventListener("click", (evt) => {
            const rect = canvas.getBoundingClientRect();
            const scale = rect.width > 0 ? canvas.width / rect.width : 1;
            const x = (evt.clientX - rect.left) * scale;
            const y = (evt.clientY - rect.top) * scale;
            draft.closeRadius = CLOSE_RADIUS * scale; // keep the click target in screen px
            draft.addPoint(x, y);
            submitButton.disabled = !draft.canSubmit;
            redraw();
        });

        undoButton.addEventListener("click", () => {
            draft.undo();
            submitButton.disabled = !draft.canSubmit;
            redraw();
        });

        submitButton.addEventListener("click", async () => {
            submitButton.disabled = true;
            try {
                await submit(draft.payload());
                resolve();
            } catch (err) {
                app.insertBefore(banner(messageOf(err), "error"), heading);
                submitButton.disabled = !draft.canSubmit;
            }
        });
    });
}

function renderIdle(): void {
    clear(app);
    app.appendChild(banner("No tasks available right now. Check back soon.", "info"));
}

function renderSignIn(): void {
    clear(app);
    const form = document.createElement("form");
    const input = document.createElement("input");
    input.placeholder = "worker id";
    const go = document.createElement("button");
    go.textContent = "Start";
    form.appendChild(input);
    form.appendChild(go);
    app.appendChild(form);
    form.addEventListener("submit", (evt) => {
        evt.preventDefault();
        const worker = input.value.trim();
        if (!worker) {
            return;
        }
        const loop = new TaskLoop(new ApiClient(""), worker, {
            renderVote: (task, submit) => renderVoteTask(task, submit),
            renderSegment: (task, submit) => renderSegmentTask(task, submit),
            onIdle: renderIdle,
            onError: (message) => {
                clear(app);
                app.appendChild(banner(message, "error"));
            },
        });
        void loop.run();
    });
}

renderSignIn();
