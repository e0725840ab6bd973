"""HTTP+JSON service driving reader sessions.

Endpoints::

    GET  /api/session/{reader}            create or resume a session
    GET  /api/session/{reader}/next       next unanswered stimulus (metadata + image URL)
    POST /api/session/{reader}/response   {"stimulus_id": str, "choice": 1..6}
    GET  /api/image/{stimulus_id}.png     display PNG
    GET  /api/report                      CSV over completed sessions only

No payload served before session completion carries truth labels, source
datasets or model keys; responses are acknowledged without feedback.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .scoring import score_study
from .stimuli import load_stimuli, reader_order
from .store import DuplicateResponseError, ResponseStore, UnknownStimulusError


class ResponseBody(BaseModel):
    stimulus_id: str
    choice: int = Field(ge=1, le=6)


def create_app(study_dir: Path | str, ui_dir: Path | str | None = None) -> FastAPI:
    study_dir = Path(study_dir)
    stimuli, config = load_stimuli(study_dir)
    store = ResponseStore(study_dir)
    by_id = {s.id: s for s in stimuli}
    known_ids = set(by_id)
    total = len(stimuli)

    app = FastAPI(title="reader study service")
    app.state.store = store
    app.state.stimuli = stimuli

    def _order(reader: str) -> list[int]:
        return store.get_or_create_session(
            reader, reader_order(total, reader, config.shuffle_seed)
        )

    @app.get("/api/session/{reader}")
    def session(reader: str) -> dict:
        _order(reader)
        answered = len(store.answered(reader))
        return {
            "reader": reader,
            "total": total,
            "answered": answered,
            "complete": answered >= total,
        }

    @app.get("/api/session/{reader}/next")
    def next_stimulus(reader: str) -> dict:
        order = _order(reader)
        answered = store.answered(reader)
        for position, index in enumerate(order):
            stim = stimuli[index]
            if stim.id not in answered:
                return {"done": False, "stimulus": stim.public_payload(position + 1, total)}
        return {"done": True, "total": total}

    @app.post("/api/session/{reader}/response")
    def respond(reader: str, body: ResponseBody) -> dict:
        _order(reader)
        try:
            store.record(reader, body.stimulus_id, body.choice, known_ids)
        except DuplicateResponseError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except UnknownStimulusError as exc:
            raise HTTPException(status_code=404, detail=f"unknown stimulus: {exc}") from exc
        answered = len(store.answered(reader))
        return {"accepted": True, "answered": answered, "remaining": total - answered}

    @app.get("/api/image/{stimulus_id}.png")
    def image(stimulus_id: str) -> FileResponse:
        stim = by_id.get(stimulus_id)
        if stim is None:
            raise HTTPException(status_code=404, detail="unknown stimulus")
        return FileResponse(study_dir / stim.image_path, media_type="image/png")

    @app.get("/api/report")
    def report() -> PlainTextResponse:
        completed = [r for r in store.readers() if store.is_complete(r, total)]
        responses = [r for r in store.responses() if r.reader_id in completed]
        table = score_study(responses, stimuli)
        return PlainTextResponse(table.to_csv(), media_type="text/csv")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(study_dir: Path | str, host: str = "127.0.0.1", port: int = 8000, ui_dir=None) -> None:
    import uvicorn

    uvicorn.run(create_app(study_dir, ui_dir=ui_dir), host=host, port=port, log_level="warning")
