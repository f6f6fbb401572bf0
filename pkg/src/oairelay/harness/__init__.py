"""Simulated data providers, fault injection, topologies and scenario running."""

from oairelay.harness.corpus import Corpus, CorpusRecord, build_corpus
from oairelay.harness.faults import FaultSpec, RECORD_FAULTS, RESPONSE_FAULTS
from oairelay.harness.scenario import (
    ScenarioError,
    ScenarioReport,
    ScenarioRunner,
    load_scenario,
    run_scenario,
)
from oairelay.harness.simdp import SimDpConfig, SimulatedProvider, spawn_sim_dp
from oairelay.harness.topology import Diamond, build_diamond

__all__ = [
    "Corpus",
    "CorpusRecord",
    "build_corpus",
    "Diamond",
    "build_diamond",
    "FaultSpec",
    "RECORD_FAULTS",
    "RESPONSE_FAULTS",
    "ScenarioError",
    "ScenarioReport",
    "ScenarioRunner",
    "load_scenario",
    "run_scenario",
    "SimDpConfig",
    "SimulatedProvider",
    "spawn_sim_dp",
]
