import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from tracekit import __version__
from tracekit.config import settings
from tracekit.routers.api import router as api_router

logging.basicConfig(level=settings.log_level)

app = FastAPI(
    title="tracekit",
    description="Trace simplification, trajectory tokens and the LBM metric over HTTP",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(api_router)


@app.get("/")
def root():
    return {"status": "ok", "app": "tracekit", "version": __version__}
