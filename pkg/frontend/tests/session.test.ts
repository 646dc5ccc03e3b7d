import { describe, expect, it } from "vitest";

import {
  AnnotationSession,
  SessionError,
  normalizeIntervals,
  serializeRecord,
} from "../src/session.js";

function markedSession(): AnnotationSession {
  const s = new AnnotationSession("v042", "a3", 100);
  s.seek(30);
  s.markBoundary("begin");
  s.seek(50);
  s.markBoundary("end");
  return s;
}

describe("interval marking", () => {
  it("records a begin/end pair as a closed inclusive interval", () => {
    const s = markedSession();
    expect(s.closed).toEqual([[30, 50]]);
    expect(s.openStart).toBeNull();
  });

  it("supports single-frame intervals (end at the begin frame)", () => {
    const s = new AnnotationSession("v", "a", 10);
    s.seek(4);
    s.markBoundary("begin");
    s.markBoundary("end");
    expect(s.closed).toEqual([[4, 4]]);
  });

  it("merges a new interval overlapping an existing one", () => {
    const s = markedSession();
    s.seek(45);
    s.markBoundary("begin");
    s.seek(60);
    s.markBoundary("end");
    expect(s.closed).toEqual([[30, 60]]);
  });

  it("merges adjacent intervals", () => {
    const s = markedSession();
    s.seek(51);
    s.markBoundary("begin");
    s.seek(55);
    s.markBoundary("end");
    expect(s.closed).toEqual([[30, 55]]);
  });

  it("keeps disjoint intervals separate and sorted", () => {
    const s = markedSession();
    s.seek(70);
    s.markBoundary("begin");
    s.seek(80);
    s.markBoundary("end");
    s.seek(5);
    s.markBoundary("begin");
    s.seek(10);
    s.markBoundary("end");
    expect(s.closed).toEqual([[5, 10], [30, 50], [70, 80]]);
  });

  it("removes the interval under the cursor", () => {
    const s = markedSession();
    s.removeIntervalAt(40);
    expect(s.closed).toEqual([]);
  });
});

describe("state-machine guards", () => {
  it("rejects begin while an interval is open, without losing state", () => {
    const s = new AnnotationSession("v", "a", 100);
    s.seek(30);
    s.markBoundary("begin");
    s.seek(40);
    expect(() => s.markBoundary("begin")).toThrow(SessionError);
    expect(s.openStart).toBe(30);
    expect(s.closed).toEqual([]);
    s.markBoundary("end");
    expect(s.closed).toEqual([[30, 40]]);
  });

  it("rejects end with no open interval", () => {
    const s = new AnnotationSession("v", "a", 100);
    expect(() => s.markBoundary("end")).toThrow(SessionError);
    expect(s.closed).toEqual([]);
  });

  it("rejects end before the open start", () => {
    const s = new AnnotationSession("v", "a", 100);
    s.seek(50);
    s.markBoundary("begin");
    s.seek(20);
    expect(() => s.markBoundary("end")).toThrow(SessionError);
    expect(s.openStart).toBe(50);
  });

  it("rejects export while an interval is open, without closing it", () => {
    const s = new AnnotationSession("v", "a", 100);
    s.markBoundary("begin");
    expect(s.canExport()).toBe(false);
    expect(() => s.exportRecord()).toThrow(SessionError);
    expect(s.openStart).toBe(0);
  });

  it("clamps the cursor to the frame range", () => {
    const s = new AnnotationSession("v", "a", 100);
    s.step(-5);
    expect(s.cursor).toBe(0);
    s.seek(1000);
    expect(s.cursor).toBe(99);
  });
});

describe("normalizeIntervals", () => {
  it("sorts and merges overlapping and adjacent spans", () => {
    expect(normalizeIntervals([[10, 20], [0, 5], [21, 30], [15, 18]]))
      .toEqual([[0, 5], [10, 30]]);
  });

  it("rejects inverted intervals", () => {
    expect(() => normalizeIntervals([[5, 3]])).toThrow(SessionError);
  });
});

describe("canonical export", () => {
  it("serializes byte-identically to the server's record files", () => {
    const record = markedSession().exportRecord();
    expect(serializeRecord(record)).toBe(
      '{"video_id":"v042","annotator_id":"a3","intervals":[[30,50]]}\n',
    );
  });

  it("serializes an empty annotation (normal video)", () => {
    const s = new AnnotationSession("v1", "a1", 10);
    expect(serializeRecord(s.exportRecord())).toBe(
      '{"video_id":"v1","annotator_id":"a1","intervals":[]}\n',
    );
  });

  it("keeps multiple intervals in ascending order in the payload", () => {
    const s = new AnnotationSession("v2", "a2", 100);
    for (const [a, b] of [[60, 70], [10, 20]]) {
      s.seek(a);
      s.markBoundary("begin");
      s.seek(b);
      s.markBoundary("end");
    }
    expect(serializeRecord(s.exportRecord())).toBe(
      '{"video_id":"v2","annotator_id":"a2","intervals":[[10,20],[60,70]]}\n',
    );
  });
});
