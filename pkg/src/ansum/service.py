"""HTTP wire API for the annotation study, consumed by the browser client.

Endpoints:
  GET  /api/task?annotator=ID   next two-stage assignment (204 when none);
                                the long answer is withheld here
  POST /api/stage1              summary-only judgments; the response
                                reveals the long answer
  POST /api/stage2              long-answer judgments, completes a record
  GET  /api/report?mode=...     aggregated study report
  GET  /api/export              full annotation log as JSON lines
  GET  /api/config              instruction text for the client
  GET  /api/selection-task      next sentence-selection task (204 when none)
  POST /api/selection           summary-sentence index set for one example

Set a bearer token to require `Authorization: Bearer <token>` on every
endpoint.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel

from .corpus import Corpus
from .errors import DataError
from .study import StudyStore, SubmissionOrderError, UnknownAssignmentError

DEFAULT_INSTRUCTIONS = {
    "stage1": "Read the question and the summary answer. Judge whether the summary is "
    "grammatical and fluent, and whether it adequately answers the question.",
    "stage2": "Now read the original long-form answer. Judge whether the summary "
    "accurately captures its main idea regarding the question, and whether the "
    "long answer itself adequately answers the question.",
    "selection": "Select every sentence that directly addresses the question and "
    "could serve as the summary of the answer. Pick at least one sentence.",
}


class Stage1Body(BaseModel):
    assignment_id: str
    fluency: str
    adequacy: str


class Stage2Body(BaseModel):
    assignment_id: str
    faithfulness: str
    long_adequacy: str


class SelectionBody(BaseModel):
    annotator_id: str
    example_id: str
    selected: list[int]


def build_app(
    store: StudyStore,
    api_token: str | None = None,
    instructions: dict | None = None,
    selection_corpus: Corpus | None = None,
) -> FastAPI:
    app = FastAPI(title="answer-summary study service")
    texts = {**DEFAULT_INSTRUCTIONS, **(instructions or {})}
    selection_examples = list(selection_corpus) if selection_corpus else []

    def check_auth(request: Request) -> None:
        if api_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {api_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    def translate(exc: DataError) -> HTTPException:
        if isinstance(exc, UnknownAssignmentError):
            return HTTPException(status_code=404, detail=str(exc))
        if isinstance(exc, SubmissionOrderError):
            return HTTPException(status_code=409, detail=str(exc))
        return HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/config")
    def get_config(request: Request):
        check_auth(request)
        return {"instructions": texts}

    @app.get("/api/task")
    def get_task(request: Request, annotator: str):
        check_auth(request)
        try:
            assignment = store.assign_task(annotator)
        except DataError as exc:
            raise translate(exc)
        if assignment is None:
            return Response(status_code=204)
        item = store.items[assignment.example_id]
        return {
            "assignment_id": assignment.assignment_id,
            "question": item.question,
            "summary_text": item.variants[assignment.variant],
        }

    @app.post("/api/stage1")
    def post_stage1(body: Stage1Body, request: Request):
        check_auth(request)
        try:
            item = store.submit_stage1(body.assignment_id, body.fluency, body.adequacy)
        except DataError as exc:
            raise translate(exc)
        return {"long_answer": item.long_answer}

    @app.post("/api/stage2")
    def post_stage2(body: Stage2Body, request: Request):
        check_auth(request)
        try:
            store.submit_stage2(body.assignment_id, body.faithfulness, body.long_adequacy)
        except DataError as exc:
            raise translate(exc)
        return {"status": "complete"}

    @app.get("/api/report")
    def get_report(request: Request, mode: str = "both", partial: bool = False):
        check_auth(request)
        try:
            if mode == "both":
                reports = [store.report(m, partial=partial).to_dict() for m in ("per-response", "majority")]
                return {"reports": reports}
            return store.report(mode, partial=partial).to_dict()
        except DataError as exc:
            raise translate(exc)

    @app.get("/api/export")
    def get_export(request: Request):
        check_auth(request)
        lines = [json.dumps(rec, ensure_ascii=False, sort_keys=True) for rec in store.export_records()]
        return Response(content="\n".join(lines) + ("\n" if lines else ""), media_type="application/x-ndjson")

    @app.get("/api/selection-task")
    def get_selection_task(request: Request, annotator: str):
        check_auth(request)
        done = {s["example_id"] for s in store.selections if s["annotator_id"] == annotator}
        for ex in selection_examples:
            if ex.id not in done:
                return {
                    "example_id": ex.id,
                    "question": ex.question,
                    "sentences": list(ex.answer_sentences),
                }
        return Response(status_code=204)

    @app.post("/api/selection")
    def post_selection(body: SelectionBody, request: Request):
        check_auth(request)
        n = None
        for ex in selection_examples:
            if ex.id == body.example_id:
                n = ex.n_sentences
                break
        try:
            store.submit_selection(body.annotator_id, body.example_id, body.selected, n_sentences=n)
        except DataError as exc:
            raise translate(exc)
        return {"status": "recorded"}

    return app
