"""Aggregator HTTP service: protocol endpoints, admin API, status codes."""

import xml.etree.ElementTree as ET
from datetime import datetime, timezone

import pytest
import requests

from oairelay.aggregator.service import AggregatorService
from oairelay.clock import SimClock
from oairelay.harness.simdp import SimDpConfig, spawn_sim_dp

OAI = "{http://www.openarchives.org/OAI/2.0/}"


@pytest.fixture
def clock():
    return SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))


@pytest.fixture
def service(tmp_path, clock):
    svc = AggregatorService(tmp_path / "store", clock=clock, timeout=5).start()
    yield svc
    svc.close()


@pytest.fixture
def provider(clock):
    dp = spawn_sim_dp(
        SimDpConfig(repository_id="alpha", record_count=8, page_size=10), clock
    )
    yield dp
    dp.close()


def register(service, provider, repository_id="alpha", trust_rank=1, **extra):
    return requests.post(
        f"{service.app.base_url}/admin/repositories",
        json={
            "repositoryId": repository_id,
            "baseURL": provider.oai_url,
            "trustRank": trust_rank,
            **extra,
        },
        timeout=5,
    )


def harvest(service, repository_id="alpha"):
    return requests.post(
        f"{service.app.base_url}/admin/harvest",
        json={"repositoryId": repository_id},
        timeout=30,
    )


class TestAdminRegistration:
    def test_active_registration_is_201(self, service, provider):
        response = register(service, provider)
        assert response.status_code == 201
        assert response.json()["status"] == "active"

    def test_unreachable_registration_is_202_pending(self, service):
        response = requests.post(
            f"{service.app.base_url}/admin/repositories",
            json={
                "repositoryId": "down",
                "baseURL": "http://127.0.0.1:9/oai",
                "trustRank": 1,
            },
            timeout=10,
        )
        assert response.status_code == 202
        assert response.json()["status"] == "pending"

    def test_wrong_protocol_version_is_422_rejected(self, service, clock):
        dp = spawn_sim_dp(
            SimDpConfig(repository_id="old", record_count=1, protocol_version="1.1"),
            clock,
        )
        try:
            response = register(service, dp, repository_id="old")
        finally:
            dp.close()
        assert response.status_code == 422
        assert response.json()["status"] == "rejected"

    def test_duplicate_registration_is_409(self, service, provider):
        register(service, provider)
        response = register(service, provider, trust_rank=2)
        assert response.status_code == 409

    def test_malformed_body_is_400(self, service):
        response = requests.post(
            f"{service.app.base_url}/admin/repositories",
            data=b"not json",
            timeout=5,
        )
        assert response.status_code == 400

    def test_repository_listing(self, service, provider):
        register(service, provider)
        listing = requests.get(
            f"{service.app.base_url}/admin/repositories", timeout=5
        ).json()
        assert [r["repositoryId"] for r in listing["repositories"]] == ["alpha"]


class TestProtocolEndpoints:
    def test_aggregated_view_answers_identify(self, service):
        response = requests.get(
            service.oai_url, params={"verb": "Identify"}, timeout=5
        )
        assert response.status_code == 200
        assert response.headers["Content-Type"].startswith("text/xml")
        root = ET.fromstring(response.content)
        assert root.find(f"{OAI}Identify") is not None

    def test_post_form_encoded_accepted(self, service):
        response = requests.post(
            service.oai_url, data={"verb": "Identify"}, timeout=5
        )
        assert ET.fromstring(response.content).find(f"{OAI}Identify") is not None

    def test_repeated_argument_across_query_and_body(self, service):
        response = requests.post(
            f"{service.oai_url}?verb=Identify", data={"verb": "Identify"}, timeout=5
        )
        root = ET.fromstring(response.content)
        codes = [e.attrib["code"] for e in root.findall(f"{OAI}error")]
        assert codes == ["badArgument"]

    def test_wrapped_view_after_harvest(self, service, provider):
        register(service, provider)
        harvest(service)
        response = requests.get(
            service.wrapped_url("alpha"),
            params={"verb": "ListIdentifiers", "metadataPrefix": "oai_dc"},
            timeout=5,
        )
        root = ET.fromstring(response.content)
        headers = root.find(f"{OAI}ListIdentifiers").findall(f"{OAI}header")
        assert len(headers) == 8

    def test_unknown_wrapped_view_is_404(self, service):
        response = requests.get(
            service.wrapped_url("ghost"), params={"verb": "Identify"}, timeout=5
        )
        assert response.status_code == 404

    def test_base_url_in_responses_matches_bind_address(self, service):
        response = requests.get(service.oai_url, params={"verb": "Identify"}, timeout=5)
        root = ET.fromstring(response.content)
        assert root.findtext(f"{OAI}request") == service.oai_url


class TestAdminHarvest:
    def test_harvest_reports_counts(self, service, provider):
        register(service, provider)
        report = harvest(service).json()
        assert report["ok"]
        assert report["harvests"][0]["ingested"] == 8
        assert report["repository"]["status"] == "active"

    def test_unknown_repository_is_404(self, service):
        assert harvest(service, "ghost").status_code == 404

    def test_status_counts_records(self, service, provider):
        register(service, provider)
        harvest(service)
        status = requests.get(
            f"{service.app.base_url}/admin/status", timeout=5
        ).json()
        assert status["records"] == 8
        assert status["identifiers"] == 8
        assert status["generation"] == 1
        assert status["repositories"][0]["storedRecords"] == 8

    def test_status_is_read_only(self, service, provider):
        register(service, provider)
        harvest(service)
        before = requests.get(f"{service.app.base_url}/admin/status", timeout=5).json()
        requests.get(f"{service.app.base_url}/admin/status", timeout=5)
        after = requests.get(f"{service.app.base_url}/admin/status", timeout=5).json()
        assert before == after


class TestPersistenceAcrossRestart:
    def test_restart_serves_same_records_without_sources(self, tmp_path, clock,
                                                         provider):
        first = AggregatorService(tmp_path / "store", clock=clock, timeout=5).start()
        register(first, provider)
        harvest(first)
        port = first.app.port
        first.close()
        provider.close()

        second = AggregatorService(
            tmp_path / "store", clock=clock, timeout=5, port=port
        ).start()
        try:
            response = requests.get(
                second.oai_url,
                params={"verb": "ListRecords", "metadataPrefix": "oai_dc"},
                timeout=5,
            )
            root = ET.fromstring(response.content)
            records = root.find(f"{OAI}ListRecords").findall(f"{OAI}record")
            assert len(records) == 8
        finally:
            second.close()

    def test_closed_service_stops_answering(self, tmp_path, clock):
        service = AggregatorService(tmp_path / "store", clock=clock, timeout=5).start()
        url = service.oai_url
        session = requests.Session()
        session.get(url, params={"verb": "Identify"}, timeout=5)
        service.close()
        with pytest.raises(requests.exceptions.RequestException):
            session.get(url, params={"verb": "Identify"}, timeout=2)
