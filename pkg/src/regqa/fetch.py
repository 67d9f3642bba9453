"""HTTP document fetching with predefined headers."""
from __future__ import annotations

import logging
from datetime import datetime, timezone

import requests

from .errors import FetchTimeout, HttpStatusError, NetworkError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_HEADERS = {
    "User-Agent": "regqa/0.1 (+corpus ingestion)",
    "Accept": "text/html,application/xhtml+xml",
}


def fetch_html(url: str, headers: dict[str, str] | None = None,
               timeout: float = DEFAULT_TIMEOUT) -> str:
    """GET ``url`` and return the body on HTTP 2xx.

    The fetch timestamp is recorded in the log. Raises HttpStatusError on
    non-2xx, FetchTimeout on expiry, NetworkError on transport failure.
    """
    merged = dict(DEFAULT_HEADERS)
    if headers:
        merged.update(headers)
    try:
        response = requests.get(url, headers=merged, timeout=timeout)
    except requests.Timeout as exc:
        raise FetchTimeout(f"timed out after {timeout}s fetching {url}") from exc
    except requests.RequestException as exc:
        raise NetworkError(f"transport failure fetching {url}: {exc}") from exc
    if not 200 <= response.status_code < 300:
        raise HttpStatusError(response.status_code, url)
    fetched_at = datetime.now(timezone.utc).isoformat()
    logger.info("fetched %s at %s (%d bytes)", url, fetched_at,
                len(response.content))
    return response.text
