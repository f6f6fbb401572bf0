"""Repairing HTTP proxy: forwards requests upstream and fixes responses in flight."""

from oairelay.proxy.routes import ProxyRoute, RoutingTable, UnknownRoute, default_routes
from oairelay.proxy.server import RepairProxy

__all__ = ["ProxyRoute", "RoutingTable", "UnknownRoute", "default_routes", "RepairProxy"]
