"""Crash-safe persistence for reader sessions and responses.

Responses go to an append-only JSON-lines log, flushed and fsynced before
the caller sees an acknowledgement, so a crash never loses an acked
response. Sessions (the per-reader presentation order) live in a JSON
index rewritten atomically. All mutation happens under one lock; each
session's responses are therefore serialized.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path

from ..storage import atomic_write_text
from .scoring import StudyResponse, choice_to_probability

RESPONSES_FILE = "responses.jsonl"
SESSIONS_FILE = "sessions.json"


class UnknownStimulusError(KeyError):
    pass


class DuplicateResponseError(ValueError):
    pass


class ResponseStore:
    def __init__(self, study_dir: Path | str):
        self.study_dir = Path(study_dir)
        self.study_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._responses: list[StudyResponse] = []
        self._answered: dict[str, set[str]] = {}
        self._sessions: dict[str, list[int]] = {}
        self._load()
        self._log = open(self.study_dir / RESPONSES_FILE, "a")

    def _load(self) -> None:
        resp_path = self.study_dir / RESPONSES_FILE
        if resp_path.exists():
            for line in resp_path.read_text().splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                response = StudyResponse(
                    reader_id=doc["reader_id"],
                    stimulus_id=doc["stimulus_id"],
                    choice=doc["choice"],
                    timestamp=doc["timestamp"],
                )
                self._responses.append(response)
                self._answered.setdefault(response.reader_id, set()).add(response.stimulus_id)
        sess_path = self.study_dir / SESSIONS_FILE
        if sess_path.exists():
            self._sessions = json.loads(sess_path.read_text())

    def close(self) -> None:
        self._log.close()

    # -- sessions -------------------------------------------------------------

    def get_or_create_session(self, reader_id: str, order: list[int]) -> list[int]:
        with self._lock:
            if reader_id not in self._sessions:
                self._sessions[reader_id] = list(order)
                atomic_write_text(
                    self.study_dir / SESSIONS_FILE, json.dumps(self._sessions, sort_keys=True)
                )
            return list(self._sessions[reader_id])

    def session_order(self, reader_id: str) -> list[int] | None:
        with self._lock:
            order = self._sessions.get(reader_id)
            return list(order) if order is not None else None

    def answered(self, reader_id: str) -> set[str]:
        with self._lock:
            return set(self._answered.get(reader_id, set()))

    # -- responses ------------------------------------------------------------

    def record(self, reader_id: str, stimulus_id: str, choice: int, known_ids: set[str]) -> StudyResponse:
        """Validate and durably append one response; acks only after fsync."""
        choice_to_probability(choice)
        with self._lock:
            if stimulus_id not in known_ids:
                raise UnknownStimulusError(stimulus_id)
            if reader_id not in self._sessions:
                raise UnknownStimulusError(f"no session for reader {reader_id}")
            if stimulus_id in self._answered.get(reader_id, set()):
                raise DuplicateResponseError(
                    f"reader {reader_id} already answered stimulus {stimulus_id}"
                )
            response = StudyResponse(
                reader_id=reader_id,
                stimulus_id=stimulus_id,
                choice=choice,
                timestamp=time.time(),
            )
            self._log.write(
                json.dumps(
                    {
                        "reader_id": response.reader_id,
                        "stimulus_id": response.stimulus_id,
                        "choice": response.choice,
                        "timestamp": response.timestamp,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            self._log.flush()
            os.fsync(self._log.fileno())
            self._responses.append(response)
            self._answered.setdefault(reader_id, set()).add(stimulus_id)
            return response

    def responses(self, reader_id: str | None = None) -> list[StudyResponse]:
        with self._lock:
            if reader_id is None:
                return list(self._responses)
            return [r for r in self._responses if r.reader_id == reader_id]

    def readers(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def is_complete(self, reader_id: str, total: int) -> bool:
        with self._lock:
            return len(self._answered.get(reader_id, set())) >= total
