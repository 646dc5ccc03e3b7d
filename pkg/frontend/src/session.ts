/**
 * Annotation session state: one annotator scrubbing one video, marking
 * abnormal intervals as they watch.
 *
 * Invariants enforced here and re-checked at export:
 * - at most one open interval;
 * - closed intervals are sorted and merged on overlap/adjacency;
 * - the cursor and every interval stay inside [0, frameCount).
 */

export type Interval = [number, number];

export interface AnnotationRecordPayload {
  video_id: string;
  annotator_id: string;
  intervals: Interval[];
}

export class SessionError extends Error {}

export function normalizeIntervals(intervals: Interval[]): Interval[] {
  const sorted = intervals
    .map(([s, e]): Interval => [s, e])
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const merged: Interval[] = [];
  for (const [s, e] of sorted) {
    if (e < s) throw new SessionError(`interval end ${e} precedes start ${s}`);
    if (s < 0) throw new SessionError(`interval start ${s} is negative`);
    const last = merged[merged.length - 1];
    if (last && s <= last[1] + 1) {
      last[1] = Math.max(last[1], e);
    } else {
      merged.push([s, e]);
    }
  }
  return merged;
}

export class AnnotationSession {
  readonly videoId: string;
  readonly annotatorId: string;
  readonly frameCount: number;
  cursor = 0;
  closed: Interval[] = [];
  openStart: number | null = null;
  submitted = false;

  constructor(videoId: string, annotatorId: string, frameCount: number) {
    if (frameCount < 1) throw new SessionError("frameCount must be positive");
    this.videoId = videoId;
    this.annotatorId = annotatorId;
    this.frameCount = frameCount;
  }

  seek(frame: number): void {
    this.cursor = Math.min(Math.max(frame, 0), this.frameCount - 1);
  }

  step(delta: number): void {
    this.seek(this.cursor + delta);
  }

  markBoundary(kind: "begin" | "end"): void {
    if (kind === "begin") {
      if (this.openStart !== null) {
        throw new SessionError(
          `an interval is already open at frame ${this.openStart}`,
        );
      }
      this.openStart = this.cursor;
    } else {
      if (this.openStart === null) {
        throw new SessionError("no open interval to end");
      }
      if (this.cursor < this.openStart) {
        throw new SessionError(
          `cannot end at frame ${this.cursor} before start ${this.openStart}`,
        );
      }
      this.closed = normalizeIntervals([
        ...this.closed,
        [this.openStart, this.cursor],
      ]);
      this.openStart = null;
    }
  }

  removeIntervalAt(frame: number): void {
    this.closed = this.closed.filter(([s, e]) => frame < s || frame > e);
  }

  canExport(): boolean {
    return this.openStart === null;
  }

  exportRecord(): AnnotationRecordPayload {
    if (!this.canExport()) {
      throw new SessionError("close the open interval before exporting");
    }
    const intervals = normalizeIntervals(this.closed);
    for (const [, e] of intervals) {
      if (e >= this.frameCount) {
        throw new SessionError(`interval end ${e} beyond last frame`);
      }
    }
    return {
      video_id: this.videoId,
      annotator_id: this.annotatorId,
      intervals,
    };
  }
}

/** Canonical serialization, byte-identical to the backend's record files. */
export function serializeRecord(payload: AnnotationRecordPayload): string {
  const { video_id, annotator_id, intervals } = payload;
  return JSON.stringify({ video_id, annotator_id, intervals }) + "\n";
}
