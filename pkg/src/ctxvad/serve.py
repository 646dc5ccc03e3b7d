"""Local annotation-exchange endpoint: serves video metadata and frame images,
accepts posted annotation records, and persists them for later aggregation.

Routes:
    GET  /videos                     -> {"videos": [video_id, ...]}
    GET  /videos/<id>                -> {"video_id", "frame_count", "fps", "category"}
    GET  /videos/<id>/frames/<idx>   -> image bytes
    POST /annotations                -> persists one AnnotationRecord payload
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .datamodel import (
    AnnotationRecord,
    ValidationError,
    annotation_payload_bytes,
)

FRAME_SUFFIXES = (".jpg", ".jpeg", ".png")


class AnnotationService:
    """Request-independent state: catalog lookup and record persistence."""

    def __init__(self, catalog, frames_root, annotation_dir, ui_root=None):
        self.by_id = {e.video_id: e for e in catalog}
        self.frames_root = Path(frames_root) if frames_root else None
        self.annotation_dir = Path(annotation_dir)
        self.annotation_dir.mkdir(parents=True, exist_ok=True)
        self.ui_root = Path(ui_root) if ui_root else None
        self._write_lock = threading.Lock()

    def list_videos(self):
        return sorted(self.by_id)

    def metadata(self, video_id):
        entry = self.by_id.get(video_id)
        if entry is None:
            return None
        return {
            "video_id": entry.video_id,
            "frame_count": entry.frame_count,
            "fps": entry.fps,
            "category": entry.category,
        }

    def frame_file(self, video_id, index):
        entry = self.by_id.get(video_id)
        if entry is None or self.frames_root is None:
            return None
        if not 0 <= index < entry.frame_count:
            return None
        vdir = self.frames_root / video_id
        for suffix in FRAME_SUFFIXES:
            for name in (f"{index:06d}{suffix}", f"{index}{suffix}"):
                path = vdir / name
                if path.exists():
                    return path
        return None

    def store_record(self, payload: dict) -> Path:
        record = AnnotationRecord.from_payload(payload)
        if record.video_id not in self.by_id:
            raise KeyError(record.video_id)
        entry = self.by_id[record.video_id]
        for _, end in record.intervals:
            if end >= entry.frame_count:
                raise ValidationError(
                    f"interval end {end} beyond frame_count {entry.frame_count} "
                    f"(field: intervals)"
                )
        path = self.annotation_dir / f"{record.video_id}__{record.annotator_id}.json"
        data = annotation_payload_bytes(record)
        with self._write_lock:
            if path.exists() and path.read_bytes() == data:
                return path  # idempotent re-post
            path.write_bytes(data)
        return path


def make_handler(service: AnnotationService):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _json(self, code, obj):
            body = json.dumps(obj).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_GET(self):
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if parts == ["videos"]:
                return self._json(200, {"videos": service.list_videos()})
            if len(parts) == 2 and parts[0] == "videos":
                meta = service.metadata(parts[1])
                if meta is None:
                    return self._json(404, {"error": f"unknown video {parts[1]!r}"})
                return self._json(200, meta)
            if len(parts) == 4 and parts[0] == "videos" and parts[2] == "frames":
                try:
                    index = int(parts[3])
                except ValueError:
                    return self._json(400, {"error": "frame index must be an integer"})
                path = service.frame_file(parts[1], index)
                if path is None:
                    return self._json(404, {"error": "frame not found"})
                body = path.read_bytes()
                self.send_response(200)
                ctype = "image/png" if path.suffix == ".png" else "image/jpeg"
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(body)
                return
            if service.ui_root and parts and not parts[0] == "annotations":
                candidate = service.ui_root / "/".join(parts)
                if candidate.is_file():
                    return self._file(candidate)
            if not parts and service.ui_root:
                index = service.ui_root / "index.html"
                if index.is_file():
                    return self._file(index)
            return self._json(404, {"error": "not found"})

        def _file(self, path: Path):
            body = path.read_bytes()
            ctypes = {".html": "text/html", ".js": "text/javascript",
                      ".css": "text/css"}
            self.send_response(200)
            self.send_header("Content-Type",
                             ctypes.get(path.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path.rstrip("/") != "/annotations":
                return self._json(404, {"error": "not found"})
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError:
                return self._json(400, {"error": "body is not valid JSON",
                                        "field": "body"})
            try:
                path = service.store_record(payload)
            except KeyError as exc:
                return self._json(404, {"error": f"unknown video {exc.args[0]!r}",
                                        "field": "video_id"})
            except ValidationError as exc:
                return self._json(400, {"error": str(exc), "field": "intervals"})
            return self._json(200, {"stored": path.name})

    return Handler


def serve(catalog, frames_root, annotation_dir, port=8765, host="127.0.0.1",
          ui_root=None) -> ThreadingHTTPServer:
    """Start the annotation endpoint (loopback bind by default). Returns the
    server; call serve_forever() or run it from a thread."""
    service = AnnotationService(catalog, frames_root, annotation_dir, ui_root)
    return ThreadingHTTPServer((host, port), make_handler(service))
