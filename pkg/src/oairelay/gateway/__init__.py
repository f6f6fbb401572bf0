"""Crawler gateway: records as persistent, linked HTML pages with throttling."""

from oairelay.gateway.backend import AggregatorClient, BackendError, UnknownRepository
from oairelay.gateway.server import GatewayService
from oairelay.gateway.throttle import Admission, ThrottleMap

__all__ = [
    "Admission",
    "AggregatorClient",
    "BackendError",
    "GatewayService",
    "ThrottleMap",
    "UnknownRepository",
]
