/**
 * Selection state for one voting task: a yes/no answer per image, submit
 * blocked until every image has an answer.
 */

export type Vote = 0 | 1;

export class VoteSheet {
    private selections: (Vote | null)[];

    constructor(public readonly imageCount: number) {
        this.selections = new Array(imageCount).fill(null);
    }

    select(index: number, vote: Vote): void {
        if (index < 0 || index >= this.imageCount) {
            throw new RangeError(`image index ${index} out of range`);
        }
        this.selections[index] = vote;
    }

    selection(index: number): Vote | null {
        return this.selections[index];
    }

    get complete(): boolean {
        return this.selections.every((v) => v !== null);
    }

    /** Votes payload; only valid once complete. */
    payload(): Vote[] {
        if (!this.complete) {
            throw new Error("votes are incomplete");
        }
        return this.selections.slice() as Vote[];
    }
}
