/** Thin client for the annotation server's HTTP endpoints. */

import { AnnotationRecordPayload, serializeRecord } from "./session.js";

export interface VideoSummary {
  video_id: string;
  category: string;
  frame_count: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function checked(resp: Response): Promise<Response> {
  if (!resp.ok) {
    const body = await resp.text().catch(() => "");
    throw new ApiError(resp.status, body.trim() || resp.statusText);
  }
  return resp;
}

export class AnnotationApi {
  constructor(readonly baseUrl: string = "") {}

  async listVideos(): Promise<VideoSummary[]> {
    const resp = await checked(await fetch(`${this.baseUrl}/videos`));
    const data = await resp.json();
    return data.videos as VideoSummary[];
  }

  async getVideo(videoId: string): Promise<VideoSummary> {
    const resp = await checked(
      await fetch(`${this.baseUrl}/videos/${encodeURIComponent(videoId)}`),
    );
    return (await resp.json()) as VideoSummary;
  }

  frameUrl(videoId: string, frame: number): string {
    return `${this.baseUrl}/videos/${encodeURIComponent(videoId)}/frames/${frame}`;
  }

  async postAnnotation(payload: AnnotationRecordPayload): Promise<void> {
    await checked(
      await fetch(`${this.baseUrl}/annotations`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: serializeRecord(payload),
      }),
    );
  }
}
