from __future__ import annotations

import logging

from fastapi import APIRouter, Body, HTTPException

from tracekit.config import settings
from tracekit.errors import TraceKitError
from tracekit.models.schemas import (
    Command,
    LbmConfig,
    LbmRequest,
    ParseRequest,
    RunConfig,
    TimedTrace,
    TokenizeRequest,
    TracePoint,
)

router = APIRouter(prefix="/api")
logger = logging.getLogger(__name__)


def _unprocessable(e: TraceKitError) -> HTTPException:
    return HTTPException(status_code=422, detail=f"{type(e).__name__}: {e}")


@router.post("/simplify")
def api_simplify(record: dict = Body(...), eps_base: float = settings.eps_base):
    """Simplify one narrative record with the offline phrase scorer."""
    from tracekit.data.narratives import record_from_obj
    from tracekit.pipeline.orchestrator import SpanScorer, simplify_record

    try:
        narrative = record_from_obj(record)
        scorer = SpanScorer(RunConfig(command=Command.SIMPLIFY, eps_base=eps_base))
        trace, report = simplify_record(narrative, scorer, eps_base)
    except TraceKitError as e:
        raise _unprocessable(e)
    except Exception as e:
        logger.exception("simplify failed")
        raise HTTPException(status_code=500, detail=f"Simplification failed: {str(e)}")

    return {
        "image_id": narrative.image_id,
        "trace": [[p.x, p.y, p.t] for p in trace.points],
        "report": report.model_dump(),
    }


@router.post("/tokenize")
def api_tokenize(req: TokenizeRequest):
    from tracekit.analysis.tokenize import quantize, serialize

    trace = TimedTrace(
        points=[TracePoint(x=x, y=y, t=0.0) for x, y in req.points],
        image_width=req.image_width,
        image_height=req.image_height,
    )
    try:
        return {"tokens": serialize(quantize(trace))}
    except TraceKitError as e:
        raise _unprocessable(e)


@router.post("/parse")
def api_parse(req: ParseRequest):
    from tracekit.analysis.tokenize import parse

    try:
        return {"coords": [list(c) for c in parse(req.text).coords]}
    except TraceKitError as e:
        raise _unprocessable(e)


@router.post("/lbm")
def api_lbm(req: LbmRequest):
    from tracekit.analysis.lbm import lbm_report

    try:
        report = lbm_report(
            req.pred,
            req.gt,
            req.image_width,
            req.image_height,
            ks=tuple(req.ks),
            config=LbmConfig(fixed_L=req.window_length),
        )
    except TraceKitError as e:
        raise _unprocessable(e)
    return report.model_dump()
