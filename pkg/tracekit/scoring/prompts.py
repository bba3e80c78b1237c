"""Prompt sent to the external phrase-importance scorer."""

PHRASE_IMPORTANCE_PROMPT = (
    "Segment this referring expression into semantic phrases and score each "
    "phrase's importance (1-5) for identifying the target object. "
    "Format: [phrase1]: score1, [phrase2]: score2, ..."
)

SCORER_REQUEST_TEMPLATE = """\
{prompt}

{caption}
"""


def build_scorer_request(caption: str) -> str:
    return SCORER_REQUEST_TEMPLATE.format(prompt=PHRASE_IMPORTANCE_PROMPT, caption=caption)
