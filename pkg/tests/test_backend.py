import json

import httpx
import pytest
from fastapi.testclient import TestClient
from pydantic import ValidationError

from rock.backend.cache import CacheFormatError, ResponseCache
from rock.backend.client import BackendClient
from rock.backend.conformance import assert_conformant
from rock.backend.ops import crop_completion, fetch_pair_scores, generate_interventions, sample_covariates
from rock.backend.stub import StubBackend, create_stub_app, stub_client
from rock.backend.wire import (
    GenerateRequest,
    MaskFillRequest,
    PerturbRequest,
    canonical_json,
    request_key,
)
from rock.errors import BackendRejected, BackendUnavailable, MalformedResponse
from rock.events import Event
from rock.scores import Orientation, ScoreNormFlags, precedence

from conftest import E1, E2, X1, A1, A2, example_universe, four_covariate_universe, make_stub_client


class TestCanonicalSerialization:
    def test_field_order_does_not_change_key(self):
        a = {"prompt": "x", "n": 3, "temperature": 0.9}
        b = {"temperature": 0.9, "n": 3, "prompt": "x"}
        assert canonical_json(a) == canonical_json(b)
        assert request_key("bk", "/v1/generate", a) == request_key("bk", "/v1/generate", b)

    def test_key_depends_on_backend_and_endpoint(self):
        payload = {"x": 1}
        assert request_key("bk1", "/e", payload) != request_key("bk2", "/e", payload)
        assert request_key("bk", "/e1", payload) != request_key("bk", "/e2", payload)

    def test_canonical_json_compact_sorted_utf8(self):
        assert canonical_json({"b": 1, "a": "é"}) == '{"a":"é","b":1}'.encode("utf-8")


class TestWireValidation:
    def test_mask_template_must_contain_exactly_one_mask(self):
        with pytest.raises(ValidationError):
            MaskFillRequest(template="no placeholder", candidates=["before"], top_k=5)
        with pytest.raises(ValidationError):
            MaskFillRequest(template="a <MASK> b <MASK> c", candidates=["before"], top_k=5)

    def test_generate_rejects_nonpositive_n(self):
        with pytest.raises(ValidationError):
            GenerateRequest(prompt="p", n=0)

    def test_perturb_rejects_unknown_codes(self):
        with pytest.raises(ValidationError):
            PerturbRequest(text="t", control_codes=["sarcasm"], n_per_code=1)


class TestResponseCache:
    def test_round_trip_byte_identical(self, tmp_path):
        cache = ResponseCache(tmp_path / "c.rockcache")
        body = b'{"scores":{"after":0.25}}'
        cache.put("k1", body)
        assert cache.get("k1") == body
        reloaded = ResponseCache(tmp_path / "c.rockcache")
        assert reloaded.get("k1") == body

    def test_torn_tail_tolerated(self, tmp_path):
        path = tmp_path / "c.rockcache"
        cache = ResponseCache(path)
        cache.put("k1", b"payload-one")
        cache.put("k2", b"payload-two")
        with open(path, "ab") as fh:
            fh.write(b"\x00\x00\x00\x09half-a-re")  # truncated record
        reloaded = ResponseCache(path)
        assert len(reloaded) == 2
        assert reloaded.get("k1") == b"payload-one"

    def test_compaction_keeps_latest_and_shrinks(self, tmp_path):
        path = tmp_path / "c.rockcache"
        cache = ResponseCache(path)
        for i in range(10):
            cache.put("same-key", f"value-{i}".encode())
        before = path.stat().st_size
        saved = cache.compact()
        assert saved > 0 and path.stat().st_size < before
        reloaded = ResponseCache(path)
        assert reloaded.get("same-key") == b"value-9"
        assert len(reloaded) == 1

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.rockcache"
        path.write_bytes(b"NOTACACHE")
        with pytest.raises(CacheFormatError):
            ResponseCache(path)

    def test_hit_miss_counters(self, tmp_path):
        cache = ResponseCache(tmp_path / "c.rockcache")
        assert cache.get("absent") is None
        cache.put("k", b"v")
        cache.get("k")
        assert cache.misses == 1 and cache.hits == 1


class TestClientRetries:
    def test_transport_failure_exhausts_retries(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            raise httpx.ConnectError("nope")

        http = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://x")
        client = BackendClient(http, backend_id="bk", max_retries=3, backoff_base=0.0)
        with pytest.raises(BackendUnavailable) as err:
            client.generate(GenerateRequest(prompt="p", n=1))
        assert calls["n"] == 4
        assert err.value.attempts == 4
        assert err.value.endpoint == "/v1/generate"
        assert client.transport_requests == 4

    def test_server_errors_retried_then_fail(self):
        def handler(request):
            return httpx.Response(503, json={"err": "loading"})

        http = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://x")
        client = BackendClient(http, backend_id="bk", max_retries=2, backoff_base=0.0)
        with pytest.raises(BackendUnavailable):
            client.generate(GenerateRequest(prompt="p", n=1))

    def test_client_errors_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, json={"error": "bad"})

        http = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://x")
        client = BackendClient(http, backend_id="bk", max_retries=3, backoff_base=0.0)
        with pytest.raises(BackendRejected):
            client.generate(GenerateRequest(prompt="p", n=1))
        assert calls["n"] == 1

    def test_malformed_body_raises_and_is_not_cached(self, tmp_path):
        def handler(request):
            return httpx.Response(200, json={"completions": "not-a-list"})

        http = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://x")
        client = BackendClient(http, cache_dir=tmp_path, backend_id="bk", backoff_base=0.0)
        with pytest.raises(MalformedResponse):
            client.generate(GenerateRequest(prompt="p", n=1))
        assert len(client.cache) == 0


class TestStubDeterminism:
    def test_identical_requests_identical_responses(self):
        u = example_universe()
        s1, s2 = StubBackend(u), StubBackend(u)
        req = GenerateRequest(prompt=E1.text + " Before that,", n=10, seed=5)
        assert s1.generate(req).model_dump() == s2.generate(req).model_dump()
        mreq = MaskFillRequest(template=f"{E1.text} <MASK> {E2.text}", candidates=["before", "after"], top_k=5)
        assert s1.mask_fill(mreq).model_dump() == s2.mask_fill(mreq).model_dump()
        preq = PerturbRequest(text=E1.text, control_codes=["lexical", "negation"], n_per_code=3)
        assert s1.perturb(preq).model_dump() == s2.perturb(preq).model_dump()

    def test_stub_scores_recover_law_under_both_orientations(self):
        a, b = Event("first happening."), Event("second happening.")
        law = {(a.id, b.id): 0.7, (b.id, a.id): 0.2}
        universe = example_universe()
        universe.events.update({a.id: a, b.id: b})
        universe.law.update(law)
        for orientation in Orientation:
            client = make_stub_client(universe, orientation=orientation)
            table = fetch_pair_scores([(a, b)], client)
            flags = ScoreNormFlags(orientation=orientation)
            assert precedence(table, a, b, flags).value == 0.7
            assert precedence(table, b, a, flags).value == 0.2

    def test_uncovered_candidate_scores_zero(self):
        stub = StubBackend(example_universe())
        resp = stub.mask_fill(
            MaskFillRequest(
                template=f"{E1.text} <MASK> {E2.text}",
                candidates=["before", "after", "banana"],
                top_k=5,
            )
        )
        assert resp.scores["banana"] == 0.0
        assert resp.covered["banana"] is False
        assert resp.covered["before"] is True


class TestOps:
    def test_crop_keeps_first_sentence(self):
        assert crop_completion("She was hungry. Then she left") == "She was hungry."
        assert crop_completion(" the door opened!") == "the door opened!"
        assert crop_completion("no stop token at all") == "no stop token at all"
        assert crop_completion("line one\nline two.") == "line one"

    def test_sample_covariates_dedups_finite_vocab(self):
        client = make_stub_client(four_covariate_universe())
        covs = sample_covariates(E1, 100, client)
        assert len(covs) == 4
        assert covs.events == tuple(Event(f"Preceding event number {i}.") for i in range(4))

    def test_sample_covariates_rejects_nonpositive_n(self, hand_client):
        with pytest.raises(ValueError):
            sample_covariates(E1, 0, hand_client)

    def test_generate_interventions_canned_and_self_excluded(self, hand_client):
        out = generate_interventions(E1, ("lexical", "negation"), 3, hand_client)
        assert out.events == (A1, A2)
        out = generate_interventions(E1, ("lexical",), 3, hand_client)
        assert out.events == (A1,)

    def test_generate_interventions_requires_codes(self, hand_client):
        with pytest.raises(ValueError):
            generate_interventions(E1, (), 3, hand_client)

    def test_fetch_pair_scores_covers_both_orders_and_nulls(self, hand_client):
        table = fetch_pair_scores([(E1, E2)], hand_client, include_null_pairs=True)
        null = Event.null()
        for pair in ((E1, E2), (E2, E1), (E1, null), (null, E1), (E2, null), (null, E2)):
            assert table.has(*pair)

    def test_warm_cache_issues_zero_transport_requests(self, tmp_path, hand_universe):
        client = make_stub_client(hand_universe, cache_dir=tmp_path)
        pairs = [(E1, E2), (X1, E1)]
        fetch_pair_scores(pairs, client)
        first = client.transport_requests
        assert first > 0
        fetch_pair_scores(pairs, client)
        assert client.transport_requests == first

        fresh = make_stub_client(hand_universe, cache_dir=tmp_path)
        fetch_pair_scores(pairs, fresh)
        assert fresh.transport_requests == 0


class TestProtocolSurfaces:
    def test_stub_app_and_transport_are_conformant(self, hand_universe):
        stub = StubBackend(hand_universe)
        assert_conformant(TestClient(create_stub_app(stub)))
        assert_conformant(stub_client(stub))

    def test_stub_app_serves_info(self, hand_universe):
        stub = StubBackend(hand_universe)
        with TestClient(create_stub_app(stub)) as tc:
            body = tc.get("/v1/info").json()
        assert body["backend_id"] == stub.backend_id
        assert "temporal-finetuned" in body["capabilities"]

    def test_transport_rejects_unknown_endpoint(self, hand_universe):
        client = stub_client(StubBackend(hand_universe))
        assert client.post("/v1/nonsense", json={}).status_code == 404

    def test_universe_json_round_trip(self, hand_universe):
        payload = hand_universe.to_payload()
        back = type(hand_universe).from_payload(json.loads(canonical_json(payload)))
        assert canonical_json(back.to_payload()) == canonical_json(payload)
