"""llm-gateway: canonicalization, cassette store, ledger arithmetic."""

from __future__ import annotations

import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TEST_PROFILE
from patscout.errors import CassetteMissError, ConfigurationError, GatewayError
from patscout.gateway import (
    CostEntry,
    CostLedger,
    LlmExchange,
    LlmGateway,
    ModelProfile,
    canonical_request,
    exchange_dollars,
    tally_cost,
)
from patscout.testing import ScriptedTransport

MSGS = [{"role": "system", "content": "You audit C/C++ code for one specific bug anti-pattern: T."},
        {"role": "user", "content": "int x;"}]


class _EchoTransport:
    def __init__(self, text="ok", tokens=(100, 10), latency=5):
        self.calls = 0
        self.text = text
        self.tokens = tokens
        self.latency = latency

    def __call__(self, request):
        self.calls += 1
        return self.text, self.tokens[0], self.tokens[1], self.latency


def test_digest_is_stable_under_param_reordering():
    _, d1 = canonical_request("m", MSGS, {"temperature": 0.2, "max_output_tokens": 100})
    _, d2 = canonical_request("m", MSGS, {"max_output_tokens": 100, "temperature": 0.2})
    assert d1 == d2


def test_digest_sensitive_to_message_text():
    _, d1 = canonical_request("m", MSGS, {})
    changed = [dict(MSGS[0]), {"role": "user", "content": "int y;"}]
    _, d2 = canonical_request("m", changed, {})
    assert d1 != d2


def test_message_content_is_verbatim_in_digest():
    spaced = [{"role": "user", "content": "a  b"}]
    tight = [{"role": "user", "content": "a b"}]
    assert canonical_request("m", spaced, {})[1] != canonical_request("m", tight, {})[1]


def test_record_then_replay_identical(tmp_path):
    transport = _EchoTransport()
    rec = LlmGateway(TEST_PROFILE, mode="record", cassette_dir=tmp_path, transport=transport)
    first = rec.complete(MSGS, stage="detect", anti_pattern="T")
    rep = LlmGateway(TEST_PROFILE, mode="replay", cassette_dir=tmp_path)
    second = rep.complete(MSGS, stage="detect", anti_pattern="T")
    third = rep.complete(MSGS, stage="detect", anti_pattern="T")
    assert transport.calls == 1
    assert second.response_text == first.response_text
    assert second.tokens_in == first.tokens_in
    assert third == second
    assert len(list(tmp_path.glob("*.json"))) == 1  # one cassette entry


def test_replay_miss_names_the_digest(tmp_path):
    gw = LlmGateway(TEST_PROFILE, mode="replay", cassette_dir=tmp_path)
    with pytest.raises(CassetteMissError) as err:
        gw.complete(MSGS)
    _, digest = canonical_request(TEST_PROFILE.model_id, MSGS, {
        "max_output_tokens": TEST_PROFILE.max_output_tokens,
        "max_reasoning_tokens": TEST_PROFILE.max_reasoning_tokens,
    })
    assert err.value.digest == digest


def test_one_changed_character_misses(tmp_path):
    transport = _EchoTransport()
    rec = LlmGateway(TEST_PROFILE, mode="record", cassette_dir=tmp_path, transport=transport)
    rec.complete(MSGS)
    rep = LlmGateway(TEST_PROFILE, mode="replay", cassette_dir=tmp_path)
    altered = [MSGS[0], {"role": "user", "content": "int x;!"}]
    with pytest.raises(CassetteMissError):
        rep.complete(altered)


def test_hybrid_falls_through_to_live_and_records(tmp_path):
    transport = _EchoTransport()
    gw = LlmGateway(TEST_PROFILE, mode="hybrid", cassette_dir=tmp_path, transport=transport)
    gw.complete(MSGS)
    assert transport.calls == 1
    gw.complete(MSGS)
    assert transport.calls == 1  # second call served from the cassette


def test_live_retries_with_backoff_then_errors(tmp_path):
    sleeps = []
    always_down = ScriptedTransport(fail_times=99)
    gw = LlmGateway(TEST_PROFILE, mode="live", transport=always_down,
                    max_retries=3, backoff_base=0.5, sleeper=sleeps.append)
    with pytest.raises(GatewayError):
        gw.complete(MSGS)
    assert sleeps == [0.5, 1.0]  # exponential backoff between the 3 attempts


def test_live_recovers_after_transient_failure():
    flaky = ScriptedTransport(fail_times=1)
    gw = LlmGateway(TEST_PROFILE, mode="live", transport=flaky, sleeper=lambda _s: None)
    exchange = gw.complete(MSGS, stage="detect", anti_pattern="T")
    assert exchange.response_text


def test_mode_validation():
    with pytest.raises(ConfigurationError):
        LlmGateway(TEST_PROFILE, mode="weird")
    with pytest.raises(ConfigurationError):
        LlmGateway(TEST_PROFILE, mode="replay")  # cassette dir required


def test_ledger_pricing_example():
    profile = ModelProfile(model_id="m", price_per_million_in=3.0, price_per_million_out=15.0)
    exchange = LlmExchange(request={}, request_digest="d", response_text="",
                           tokens_in=120000, tokens_out=30000, latency_ms=10)
    assert exchange_dollars(exchange, profile) == 0.81


def test_ledger_entry_recorded_per_call(tmp_path):
    ledger = CostLedger()
    gw = LlmGateway(TEST_PROFILE, mode="record", cassette_dir=tmp_path,
                    transport=_EchoTransport(tokens=(1000, 100), latency=250), ledger=ledger)
    gw.complete(MSGS, stage="detect", anti_pattern="LZD")
    (entry,) = ledger.entries
    assert entry.stage == "detect"
    assert entry.anti_pattern == "LZD"
    assert entry.tokens_in == 1000
    assert entry.seconds == 0.25
    expected = round((1000 * 3.0 + 100 * 15.0) / 1_000_000, 4)
    assert entry.dollars == expected


def test_replay_reuses_recorded_token_counts(tmp_path):
    rec = LlmGateway(TEST_PROFILE, mode="record", cassette_dir=tmp_path,
                     transport=_EchoTransport(tokens=(42, 7)))
    rec.complete(MSGS)
    ledger = CostLedger()
    rep = LlmGateway(TEST_PROFILE, mode="replay", cassette_dir=tmp_path, ledger=ledger)
    rep.complete(MSGS)
    assert ledger.entries[0].tokens_in == 42
    assert ledger.entries[0].tokens_out == 7


def test_tally_empty_ledger():
    table = tally_cost(CostLedger(), group_by="anti_pattern")
    assert table["groups"] == {}
    assert table["total"]["dollars"] == 0.0


def test_tally_groups_and_total():
    ledger = CostLedger()
    ledger.add(CostEntry("detect", "LZD", 10, 5, 0.70, 1.0))
    ledger.add(CostEntry("validate", "LZD", 10, 5, 0.70, 2.0))
    table = tally_cost(ledger, group_by="anti_pattern")
    assert table["groups"]["LZD"]["dollars"] == pytest.approx(1.40)
    assert table["total"]["dollars"] == pytest.approx(1.40)
    by_stage = tally_cost(ledger, group_by="stage")
    assert set(by_stage["groups"]) == {"detect", "validate"}


@given(st.lists(
    st.tuples(
        st.sampled_from(["OSO", "NOF", "ASO", "IZC", "LZD", "UEC", "MSC"]),
        st.sampled_from(["strategy-synthesis", "detect", "validate"]),
        st.integers(min_value=0, max_value=200_000),
        st.integers(min_value=0, max_value=50_000),
        st.floats(min_value=0, max_value=100, allow_nan=False),
    ),
    max_size=40,
))
@settings(max_examples=50, deadline=None)
def test_ledger_additivity_property(entries):
    ledger = CostLedger()
    for ap, stage, tin, tout, secs in entries:
        dollars = round((tin * 3.0 + tout * 15.0) / 1_000_000, 4)
        ledger.add(CostEntry(stage, ap, tin, tout, dollars, secs))
    for group_by in ("anti_pattern", "stage"):
        table = tally_cost(ledger, group_by=group_by)
        for key in ("dollars", "seconds", "tokens_in", "tokens_out"):
            assert table["total"][key] == pytest.approx(
                sum(g[key] for g in table["groups"].values()))


@given(st.dictionaries(
    st.sampled_from(["temperature", "max_output_tokens", "max_reasoning_tokens", "seed"]),
    st.one_of(st.integers(0, 10_000), st.floats(0, 2, allow_nan=False)),
    max_size=4,
))
@settings(max_examples=50, deadline=None)
def test_canonicalization_order_independent_property(params):
    base = canonical_request("m", MSGS, dict(params))[1]
    reordered = canonical_request("m", MSGS, dict(reversed(list(params.items()))))[1]
    assert base == reordered


def test_concurrent_completes_are_safe(tmp_path):
    gw = LlmGateway(TEST_PROFILE, mode="record", cassette_dir=tmp_path,
                    transport=_EchoTransport(), ledger=CostLedger())
    errors = []

    def worker(i: int) -> None:
        try:
            msgs = [{"role": "user", "content": f"probe {i % 4}"}]
            gw.complete(msgs, stage="detect", anti_pattern="T")
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(gw.ledger.entries) == 16
    assert len(list(tmp_path.glob("*.json"))) == 4  # one per distinct digest


def test_http_transport_requires_api_key(monkeypatch):
    from patscout.gateway import HttpChatTransport

    monkeypatch.delenv("PATSCOUT_API_KEY", raising=False)
    transport = HttpChatTransport("https://stub.invalid/v1")
    with pytest.raises(GatewayError, match="PATSCOUT_API_KEY"):
        transport({"model_id": "m", "messages": [], "params": {}})


def test_tally_rejects_unknown_grouping():
    with pytest.raises(ConfigurationError):
        tally_cost(CostLedger(), group_by="model")


def test_cassette_files_are_pretty_json(tmp_path):
    gw = LlmGateway(TEST_PROFILE, mode="record", cassette_dir=tmp_path, transport=_EchoTransport())
    exchange = gw.complete(MSGS)
    path = tmp_path / f"{exchange.request_digest}.json"
    doc = json.loads(path.read_text())
    assert doc["response"]["text"] == "ok"
    assert doc["request"]["model_id"] == TEST_PROFILE.model_id
