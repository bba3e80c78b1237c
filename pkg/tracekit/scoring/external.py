"""Client for an external LLM phrase-importance scorer.

The wire format is deliberately minimal: the request body is the plain-text
prompt with the caption appended, and the response body is plain text with
entries of the form ``[<phrase>]: <integer>`` (one per line or comma
separated).
"""

from __future__ import annotations

import asyncio
import logging
import re
from typing import Dict, List, Optional, Sequence, Tuple

import httpx

from tracekit.errors import MalformedResponse, ScorerTimeout, ScorerTransportError
from tracekit.models.schemas import ScorerConfig
from tracekit.scoring.heuristic import heuristic_score, tokens
from tracekit.scoring.prompts import build_scorer_request
from tracekit.scoring.weights import MAX_SCORE, MIN_SCORE, clamp_score

logger = logging.getLogger(__name__)

ENTRY_PATTERN = re.compile(r"\[([^\[\]]+)\]\s*:\s*(-?\d+)")
REQUEST_ID_HEADER = "X-Request-Id"

ScoredPhrase = Tuple[str, int]


def _normalize(phrase: str) -> str:
    return " ".join(tokens(phrase))


def parse_scored_phrases(body: str) -> List[ScoredPhrase]:
    """Extract ``[phrase]: score`` entries, clamping scores to 1..5."""
    entries = []
    for phrase, raw in ENTRY_PATTERN.findall(body):
        score = int(raw)
        if not MIN_SCORE <= score <= MAX_SCORE:
            logger.warning(f"Scorer returned {score} for {phrase!r}; clamping to {MIN_SCORE}..{MAX_SCORE}")
            score = clamp_score(score)
        entries.append((phrase.strip(), score))
    return entries


class ExternalScorer:
    def __init__(
        self,
        config: ScorerConfig,
        transport: Optional[httpx.BaseTransport] = None,
        async_transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        self.config = config
        self._transport = transport
        self._async_transport = async_transport

    def _headers(self, request_id: str) -> Dict[str, str]:
        headers = {
            "Content-Type": "text/plain; charset=utf-8",
            "Accept": "text/plain",
            REQUEST_ID_HEADER: request_id,
        }
        if self.config.token:
            headers["Authorization"] = f"Bearer {self.config.token}"
        return headers

    def _check(self, resp: httpx.Response) -> str:
        if not resp.is_success:
            raise ScorerTransportError(resp.status_code, resp.text[:200])
        return resp.text

    def request(self, caption: str, request_id: str = "0") -> str:
        """POST one caption and return the raw completion text."""
        try:
            with httpx.Client(transport=self._transport, timeout=self.config.timeout) as client:
                resp = client.post(
                    self.config.endpoint_url,
                    content=build_scorer_request(caption),
                    headers=self._headers(request_id),
                )
        except (httpx.TimeoutException, httpx.ConnectError) as e:
            raise ScorerTimeout(
                f"scorer at {self.config.endpoint_url} did not answer within {self.config.timeout}s: {e}"
            ) from e
        except (httpx.HTTPError, httpx.InvalidURL) as e:
            raise ScorerTransportError(None, f"{type(e).__name__}: {e}") from e
        return self._check(resp)

    def segment(self, caption: str) -> List[ScoredPhrase]:
        """The model's own phrase segmentation of a caption, with scores."""
        entries = parse_scored_phrases(self.request(caption))
        if not entries:
            raise MalformedResponse(f"no '[phrase]: score' entries in scorer reply for {caption!r}")
        return entries

    def score(self, phrases: Sequence[str], caption: Optional[str] = None) -> List[int]:
        """Scores for pre-segmented phrases; unparsed phrases use the heuristic."""
        caption = caption if caption is not None else " ".join(phrases)
        by_phrase: Dict[str, int] = {}
        for phrase, score in self.segment(caption):
            by_phrase.setdefault(_normalize(phrase), score)

        scores = []
        for phrase in phrases:
            key = _normalize(phrase)
            if key in by_phrase:
                scores.append(by_phrase[key])
            else:
                fallback = heuristic_score(phrase)
                logger.warning(f"No external score for {phrase!r}; heuristic gives {fallback}")
                scores.append(fallback)
        return scores

    async def score_many(self, captions: Sequence[str]) -> List[List[ScoredPhrase]]:
        """Segment many captions with a bounded number of requests in flight.

        Replies are matched to captions by the request id echoed on the
        request object, not by completion order.
        """
        gate = asyncio.Semaphore(self.config.max_in_flight)

        async with httpx.AsyncClient(
            transport=self._async_transport, timeout=self.config.timeout
        ) as client:

            async def one(request_id: str, caption: str) -> Tuple[str, str]:
                async with gate:
                    try:
                        resp = await client.post(
                            self.config.endpoint_url,
                            content=build_scorer_request(caption),
                            headers=self._headers(request_id),
                        )
                    except (httpx.TimeoutException, httpx.ConnectError) as e:
                        raise ScorerTimeout(f"request {request_id} timed out: {e}") from e
                    except (httpx.HTTPError, httpx.InvalidURL) as e:
                        raise ScorerTransportError(None, f"request {request_id}: {type(e).__name__}: {e}") from e
                return resp.request.headers[REQUEST_ID_HEADER], self._check(resp)

            replies = await asyncio.gather(
                *(one(str(i), caption) for i, caption in enumerate(captions))
            )

        bodies = dict(replies)
        results = []
        for i, caption in enumerate(captions):
            entries = parse_scored_phrases(bodies[str(i)])
            if not entries:
                raise MalformedResponse(f"no '[phrase]: score' entries in scorer reply for {caption!r}")
            results.append(entries)
        return results


def external_score(
    phrases: Sequence[str],
    config: ScorerConfig,
    caption: Optional[str] = None,
    transport: Optional[httpx.BaseTransport] = None,
) -> List[int]:
    return ExternalScorer(config, transport=transport).score(phrases, caption)
