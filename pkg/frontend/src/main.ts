/** Keyboard-first frame annotator. Wires the session state machine to the
 * DOM: a frame viewer, an interval timeline, and a status line. */

import { AnnotationApi, VideoSummary } from "./api.js";
import { AnnotationSession, SessionError } from "./session.js";

const api = new AnnotationApi();

const el = {
  picker: document.getElementById("video-picker") as HTMLSelectElement,
  annotator: document.getElementById("annotator-id") as HTMLInputElement,
  frame: document.getElementById("frame-view") as HTMLImageElement,
  scrub: document.getElementById("scrubber") as HTMLInputElement,
  timeline: document.getElementById("timeline") as HTMLCanvasElement,
  status: document.getElementById("status") as HTMLElement,
  intervals: document.getElementById("interval-list") as HTMLElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
};

let session: AnnotationSession | null = null;

function say(msg: string, isError = false): void {
  el.status.textContent = msg;
  el.status.classList.toggle("error", isError);
}

function drawTimeline(s: AnnotationSession): void {
  const ctx = el.timeline.getContext("2d");
  if (!ctx) return;
  const { width, height } = el.timeline;
  const perFrame = width / s.frameCount;
  ctx.fillStyle = "#2b2b2b";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#c0392b";
  for (const [a, b] of s.closed) {
    ctx.fillRect(a * perFrame, 0, (b - a + 1) * perFrame, height);
  }
  if (s.openStart !== null) {
    ctx.fillStyle = "#e67e22";
    const b = Math.max(s.cursor, s.openStart);
    ctx.fillRect(s.openStart * perFrame, 0, (b - s.openStart + 1) * perFrame, height);
  }
  ctx.fillStyle = "#ecf0f1";
  ctx.fillRect(s.cursor * perFrame, 0, Math.max(perFrame, 2), height);
}

function render(): void {
  if (!session) return;
  const s = session;
  el.frame.src = api.frameUrl(s.videoId, s.cursor);
  el.scrub.max = String(s.frameCount - 1);
  el.scrub.value = String(s.cursor);
  el.intervals.textContent = s.closed.map(([a, b]) => `[${a}, ${b}]`).join("  ");
  drawTimeline(s);
  const open = s.openStart !== null ? `, open interval from ${s.openStart}` : "";
  say(`frame ${s.cursor} / ${s.frameCount - 1}${open}` +
      (s.submitted ? " — submitted" : ""));
}

async function loadVideo(meta: VideoSummary): Promise<void> {
  session = new AnnotationSession(
    meta.video_id, el.annotator.value.trim() || "anonymous", meta.frame_count);
  render();
}

async function submit(): Promise<void> {
  if (!session) return;
  try {
    const payload = session.exportRecord();
    await api.postAnnotation(payload);
    session.submitted = true;
    render();
    say(`saved ${payload.intervals.length} interval(s) for ${payload.video_id}`);
  } catch (e) {
    say(e instanceof Error ? e.message : String(e), true);
  }
}

function onKey(ev: KeyboardEvent): void {
  if (!session || ev.target === el.annotator) return;
  const s = session;
  const stride = ev.shiftKey ? 10 : 1;
  try {
    switch (ev.key) {
      case "ArrowLeft": case "h": s.step(-stride); break;
      case "ArrowRight": case "l": s.step(stride); break;
      case "Home": s.seek(0); break;
      case "End": s.seek(s.frameCount - 1); break;
      case "[": case "b": s.markBoundary("begin"); break;
      case "]": case "e": s.markBoundary("end"); break;
      case "x": s.removeIntervalAt(s.cursor); break;
      case "Enter": void submit(); return;
      default: return;
    }
  } catch (e) {
    if (e instanceof SessionError) { say(e.message, true); return; }
    throw e;
  }
  ev.preventDefault();
  render();
}

async function init(): Promise<void> {
  const videos = await api.listVideos();
  for (const v of videos) {
    const opt = document.createElement("option");
    opt.value = v.video_id;
    opt.textContent = `${v.video_id} (${v.category}, ${v.frame_count} frames)`;
    el.picker.appendChild(opt);
  }
  el.picker.addEventListener("change", () => {
    const v = videos.find((x) => x.video_id === el.picker.value);
    if (v) void loadVideo(v);
  });
  el.scrub.addEventListener("input", () => {
    session?.seek(Number(el.scrub.value));
    render();
  });
  el.submit.addEventListener("click", () => void submit());
  document.addEventListener("keydown", onKey);
  if (videos.length) {
    el.picker.value = videos[0].video_id;
    await loadVideo(videos[0]);
  } else {
    say("no videos available", true);
  }
}

void init().catch((e) => say(e instanceof Error ? e.message : String(e), true));
