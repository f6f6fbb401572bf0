"""OAI-PMH 2.0 relay toolkit: repairing proxy, aggregator-cache, crawler gateway.

The package is organised around the dataflow between metadata providers and
the services built on top of them:

- ``oairelay.protocol``   -- wire model, parsing, serialization, validation
- ``oairelay.repair``     -- byte-level response repair (UTF-8, entities, markup)
- ``oairelay.proxy``      -- repairing forward proxy over source repositories
- ``oairelay.aggregator`` -- harvesting cache with provenance and collision policies
- ``oairelay.gateway``    -- crawlable HTML gateway backed by the aggregator
- ``oairelay.harness``    -- simulated providers, fault injection, scenarios
"""

__version__ = "0.1.0"
