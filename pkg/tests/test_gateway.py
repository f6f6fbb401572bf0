"""Crawler gateway: throttling, record pages, index pages, robots, sitemap."""

import re
from datetime import datetime, timezone
from urllib.parse import quote, unquote

import pytest
import requests

from oairelay.aggregator.service import AggregatorService
from oairelay.clock import SimClock
from oairelay.gateway.pages import identifier_from_segment, index_path, record_path
from oairelay.gateway.server import GatewayService
from oairelay.gateway.throttle import ThrottleMap
from oairelay.harness.simdp import SimDpConfig, spawn_sim_dp
from oairelay.protocol.datestamp import Datestamp

RECORDS = 5


class GatewayFixture:
    def __init__(self, tmp_path):
        self.clock = SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))
        self.dp = spawn_sim_dp(
            SimDpConfig(repository_id="alpha", record_count=RECORDS, page_size=50),
            self.clock,
        )
        self.agg = AggregatorService(tmp_path / "store", clock=self.clock,
                                     timeout=5).start()
        requests.post(
            f"{self.agg.app.base_url}/admin/repositories",
            json={"repositoryId": "alpha", "baseURL": self.dp.oai_url, "trustRank": 1},
            timeout=5,
        )
        requests.post(
            f"{self.agg.app.base_url}/admin/harvest",
            json={"repositoryId": "alpha"},
            timeout=30,
        )
        self.gateway = GatewayService(
            self.agg.oai_url,
            page_size=2,
            throttle_capacity=1000,
            throttle_refill=1000.0,
            clock=self.clock,
        ).start()
        self.identifiers = sorted(r.identifier for r in self.dp.corpus.ordered())

    def close(self):
        self.gateway.close()
        self.agg.close()
        self.dp.close()

    def get(self, path, **kwargs):
        kwargs.setdefault("timeout", 5)
        return requests.get(f"{self.gateway.base_url}{path}", **kwargs)


@pytest.fixture(scope="module")
def gw(tmp_path_factory):
    fixture = GatewayFixture(tmp_path_factory.mktemp("gateway"))
    yield fixture
    fixture.close()


class TestThrottleMap:
    def test_burst_admits_exactly_capacity(self):
        clock = SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))
        throttle = ThrottleMap(capacity=3, refill_per_second=1.0, clock=clock)
        verdicts = [throttle.check("1.2.3.4").admitted for _ in range(4)]
        assert verdicts == [True, True, True, False]

    def test_retry_after_counts_seconds_to_next_token(self):
        clock = SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))
        throttle = ThrottleMap(capacity=2, refill_per_second=0.5, clock=clock)
        throttle.check("c")
        throttle.check("c")
        refusal = throttle.check("c")
        assert not refusal.admitted
        assert refusal.retry_after == 2

    def test_refill_readmits_after_wait(self):
        clock = SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))
        throttle = ThrottleMap(capacity=1, refill_per_second=1.0, clock=clock)
        assert throttle.check("c").admitted
        assert not throttle.check("c").admitted
        clock.advance(1)
        assert throttle.check("c").admitted

    def test_clients_do_not_share_buckets(self):
        clock = SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))
        throttle = ThrottleMap(capacity=1, refill_per_second=1.0, clock=clock)
        assert throttle.check("a").admitted
        assert throttle.check("b").admitted

    def test_bucket_never_exceeds_capacity(self):
        clock = SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))
        throttle = ThrottleMap(capacity=2, refill_per_second=1.0, clock=clock)
        clock.advance(3600)
        verdicts = [throttle.check("c").admitted for _ in range(3)]
        assert verdicts == [True, True, False]


class TestUrlBijection:
    NASTY = [
        "oai:alpha.example.org:art/0001",
        "oai:x:with space",
        "oai:x:percent%sign",
        "oai:x:sl/ash?and=query#frag",
        "oai:x:unicode-é中",
    ]

    def test_round_trip_is_identity(self):
        for identifier in self.NASTY:
            path = record_path("alpha", identifier)
            segment = path.rsplit("/", 1)[1]
            assert identifier_from_segment(segment) == identifier

    def test_no_two_identifiers_share_a_path(self):
        paths = {record_path("alpha", i) for i in self.NASTY}
        assert len(paths) == len(self.NASTY)

    def test_reserved_characters_fully_encoded(self):
        path = record_path("alpha", "oai:x:sl/ash?and=query#frag")
        segment = path.rsplit("/", 1)[1]
        assert "/" not in segment
        assert "?" not in segment
        assert "#" not in segment


class TestRecordPages:
    def test_record_page_has_catalogue_fields(self, gw):
        identifier = gw.identifiers[0]
        response = gw.get(record_path("alpha", identifier))
        assert response.status_code == 200
        assert response.headers["Content-Type"].startswith("text/html")
        page = response.text
        assert identifier in page
        assert "<dt>Title</dt>" in page
        assert "<dt>Creator</dt>" in page
        assert "<dt>Datestamp</dt>" in page

    def test_record_page_links_neighbours_and_index(self, gw):
        response = gw.get(record_path("alpha", gw.identifiers[1]))
        page = response.text
        assert quote(gw.identifiers[0], safe="") in page
        assert quote(gw.identifiers[2], safe="") in page
        assert 'rel="index"' in page

    def test_first_record_has_no_prev(self, gw):
        page = gw.get(record_path("alpha", gw.identifiers[0])).text
        assert 'rel="prev"' not in page
        assert 'rel="next"' in page

    def test_unknown_identifier_is_404(self, gw):
        assert gw.get(record_path("alpha", "oai:alpha.example.org:nope")).status_code == 404

    def test_unknown_repository_is_404(self, gw):
        assert gw.get(record_path("ghost", gw.identifiers[0])).status_code == 404

    def test_deleted_record_is_410(self, gw):
        victim = gw.identifiers[2]
        gw.dp.corpus.delete(victim, Datestamp(gw.clock.now()))
        gw.clock.advance(60)
        requests.post(
            f"{gw.agg.app.base_url}/admin/harvest",
            json={"repositoryId": "alpha"},
            timeout=30,
        )
        assert gw.get(record_path("alpha", victim)).status_code == 410

    def test_deleted_record_disappears_from_index(self, gw):
        listing = "".join(
            gw.get(index_path("alpha", page)).text for page in range(2)
        )
        assert quote(gw.identifiers[2], safe="") not in listing


class TestIndexPages:
    def test_pages_split_by_page_size(self, gw):
        live = [i for i in gw.identifiers if i != gw.identifiers[2]]
        seen = []
        for page in range(2):
            html = gw.get(index_path("alpha", page)).text
            seen.extend(re.findall(r'href="/gw/alpha/(?!index/)([^"]+)"', html))
        assert [unquote(s) for s in seen] == live

    def test_page_past_end_is_404(self, gw):
        assert gw.get(index_path("alpha", 99)).status_code == 404

    def test_non_numeric_page_is_404(self, gw):
        assert gw.get("/gw/alpha/index/abc").status_code == 404

    def test_crawl_from_page_zero_reaches_every_live_record(self, gw):
        seen, frontier = set(), {index_path("alpha", 0)}
        while frontier:
            path = frontier.pop()
            if path in seen:
                continue
            seen.add(path)
            response = gw.get(path)
            assert response.status_code == 200, path
            for href in re.findall(r'href="(/gw/[^"]+)"', response.text):
                if href not in seen:
                    frontier.add(href)
        live = {i for i in gw.identifiers if i != gw.identifiers[2]}
        record_pages = {
            unquote(p.rsplit("/", 1)[1])
            for p in seen
            if "/index/" not in p
        }
        assert record_pages == live

    def test_crawl_makes_no_upstream_requests(self, gw):
        before = gw.dp.request_count
        for page in range(2):
            gw.get(index_path("alpha", page))
        gw.get(record_path("alpha", gw.identifiers[0]))
        assert gw.dp.request_count == before


class TestRobotsAndSitemap:
    def test_robots_allows_all_without_exclusions(self, gw):
        robots = gw.get("/robots.txt")
        assert robots.status_code == 200
        assert "User-agent: *" in robots.text
        assert "Disallow: /gw/" not in robots.text

    def test_robots_lists_excluded_repositories(self, tmp_path):
        gateway = GatewayService(
            "http://127.0.0.1:9/oai", excluded=("private", "internal")
        ).start()
        try:
            robots = requests.get(f"{gateway.base_url}/robots.txt", timeout=5)
        finally:
            gateway.close()
        assert "Disallow: /gw/internal/" in robots.text
        assert "Disallow: /gw/private/" in robots.text

    def test_sitemap_lists_index_pages(self, gw):
        sitemap = gw.get("/sitemap.xml")
        assert sitemap.status_code == 200
        locs = re.findall(r"<loc>([^<]+)</loc>", sitemap.text)
        assert f"{gw.gateway.base_url}{index_path('alpha', 0)}" in locs
        assert f"{gw.gateway.base_url}{index_path('alpha', 1)}" in locs

    def test_sitemap_omits_excluded_repositories(self, gw):
        gateway = GatewayService(
            gw.agg.oai_url, page_size=2, excluded=("alpha",)
        ).start()
        try:
            sitemap = requests.get(f"{gateway.base_url}/sitemap.xml", timeout=5)
        finally:
            gateway.close()
        assert "/gw/alpha/" not in sitemap.text


class TestBackendFailures:
    def test_aggregator_down_is_503(self):
        gateway = GatewayService("http://127.0.0.1:9/oai").start()
        try:
            response = requests.get(
                f"{gateway.base_url}/gw/alpha/index/0", timeout=5
            )
            assert response.status_code == 503
            record = requests.get(
                f"{gateway.base_url}/gw/alpha/oai%3Ax%3A1", timeout=5
            )
            assert record.status_code == 503
        finally:
            gateway.close()


class TestHttpThrottling:
    def test_burst_limit_answered_with_retry_after(self, gw):
        gateway = GatewayService(
            gw.agg.oai_url, page_size=2, throttle_capacity=3, throttle_refill=1.0,
            clock=gw.clock,
        ).start()
        try:
            statuses = [
                requests.get(f"{gateway.base_url}{index_path('alpha', 0)}",
                             timeout=5).status_code
                for _ in range(4)
            ]
            refused = requests.get(
                f"{gateway.base_url}{index_path('alpha', 0)}", timeout=5
            )
        finally:
            gateway.close()
        assert statuses == [200, 200, 200, 429]
        assert refused.status_code == 429
        assert int(refused.headers["Retry-After"]) >= 1

    def test_forwarded_header_separates_clients(self, gw):
        gateway = GatewayService(
            gw.agg.oai_url, page_size=2, throttle_capacity=1, throttle_refill=0.01,
            clock=gw.clock,
        ).start()
        try:
            first = requests.get(
                f"{gateway.base_url}{index_path('alpha', 0)}",
                headers={"X-Forwarded-For": "10.0.0.1"},
                timeout=5,
            )
            blocked = requests.get(
                f"{gateway.base_url}{index_path('alpha', 0)}",
                headers={"X-Forwarded-For": "10.0.0.1"},
                timeout=5,
            )
            other = requests.get(
                f"{gateway.base_url}{index_path('alpha', 0)}",
                headers={"X-Forwarded-For": "10.0.0.2"},
                timeout=5,
            )
        finally:
            gateway.close()
        assert first.status_code == 200
        assert blocked.status_code == 429
        assert other.status_code == 200
