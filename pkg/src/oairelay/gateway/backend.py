"""Read-only client for the aggregator that backs the gateway.

The gateway never talks to source repositories: record content comes from
GetRecord against the aggregator's wrapped views and orderings come from
ListIdentifiers, so a full crawl of the gateway costs the sources nothing.
"""

from __future__ import annotations

import json

import requests

from oairelay.protocol.model import (
    ErrorsPayload,
    HeadersPayload,
    OaiErrorCode,
    OaiRecord,
    RecordHeader,
    RecordPayload,
)
from oairelay.protocol.parse import parse_response


class BackendError(Exception):
    """The aggregator could not be read."""


class UnknownRepository(BackendError):
    """The aggregator has no wrapped view under that repository id."""


class AggregatorClient:
    def __init__(
        self,
        base_url: str,
        session: requests.Session | None = None,
        timeout: float = 10.0,
    ):
        #: the aggregator's merged-view endpoint, e.g. http://host:port/oai
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        self.timeout = timeout

    def _view_url(self, repository_id: str) -> str:
        return f"{self.base_url}/{repository_id}"

    def _get(self, url: str, params: dict):
        try:
            http = self.session.get(url, params=params, timeout=self.timeout)
        except requests.exceptions.RequestException as exc:
            raise BackendError(f"aggregator unreachable: {exc}") from exc
        if http.status_code == 404:
            raise UnknownRepository(f"no such repository view: {url}")
        if http.status_code != 200:
            raise BackendError(f"aggregator answered HTTP {http.status_code}")
        result = parse_response(http.content)
        if result.response is None or result.fatal:
            raise BackendError("aggregator answered an unreadable response")
        return result.response.payload

    def list_headers(
        self, repository_id: str, metadata_prefix: str
    ) -> list[RecordHeader]:
        """All headers of one wrapped view, in served (identifier) order."""
        url = self._view_url(repository_id)
        params = {"verb": "ListIdentifiers", "metadataPrefix": metadata_prefix}
        headers: list[RecordHeader] = []
        while True:
            payload = self._get(url, params)
            if isinstance(payload, ErrorsPayload):
                codes = {e.code for e in payload.errors}
                if codes == {OaiErrorCode.NO_RECORDS_MATCH}:
                    return headers
                raise BackendError(
                    "aggregator error: "
                    + ", ".join(sorted(c.value for c in codes))
                )
            if not isinstance(payload, HeadersPayload):
                raise BackendError("aggregator answered a different verb")
            headers.extend(payload.headers)
            if payload.token is None or payload.token.final:
                return headers
            params = {
                "verb": "ListIdentifiers",
                "resumptionToken": payload.token.token,
            }

    def get_record(
        self, repository_id: str, identifier: str, metadata_prefix: str
    ) -> OaiRecord | None:
        """One record from a wrapped view; None when the id is unknown there."""
        payload = self._get(
            self._view_url(repository_id),
            {
                "verb": "GetRecord",
                "identifier": identifier,
                "metadataPrefix": metadata_prefix,
            },
        )
        if isinstance(payload, ErrorsPayload):
            codes = {e.code for e in payload.errors}
            if codes <= {
                OaiErrorCode.ID_DOES_NOT_EXIST,
                OaiErrorCode.CANNOT_DISSEMINATE_FORMAT,
            }:
                return None
            raise BackendError(
                "aggregator error: " + ", ".join(sorted(c.value for c in codes))
            )
        if not isinstance(payload, RecordPayload):
            raise BackendError("aggregator answered a different verb")
        return payload.record

    def repositories(self) -> list[str]:
        """Repository ids the aggregator serves wrapped views for."""
        root = self.base_url.removesuffix("/oai")
        try:
            http = self.session.get(
                f"{root}/admin/repositories", timeout=self.timeout
            )
        except requests.exceptions.RequestException as exc:
            raise BackendError(f"aggregator unreachable: {exc}") from exc
        if http.status_code == 404:
            raise UnknownRepository(f"no such repository view: {url}")
        if http.status_code != 200:
            raise BackendError(f"aggregator answered HTTP {http.status_code}")
        try:
            data = json.loads(http.content)
            return sorted(r["repositoryId"] for r in data["repositories"])
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"bad repository listing: {exc}") from exc
