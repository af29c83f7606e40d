import pytest

from audioeval.config import EndpointSpec, TaskSpec
from audioeval.dataset import AudioRef, ReferenceTarget, SampleRecord, Shard, Turn
from audioeval.engine import ChainError, EngineRun, run_engine, run_multi_turn
from audioeval.config import resolve_effective_settings
from audioeval.mocklalm import scripted_turn_check
from audioeval.scheduler import PermitPool

from helpers import write_wav


def task(multi_turn=False, template="{text}"):
    return TaskSpec("t", "SpeechRecognition", "d.jsonl", ("wer",), prompt_template=template,
                    multi_turn=multi_turn)


def text_sample(sid, *texts):
    return SampleRecord(sid, (), tuple(Turn("user", t) for t in texts), ReferenceTarget("plain_text", "x"))


def eng(url, name="m", **kw):
    return EndpointSpec(name, url, name, **kw)


def test_two_by_two_sorted(mock_server):
    srv = mock_server(latency_s=(0.0, 0.03))
    run = EngineRun(task(), Shard("a", (text_sample("s2", "x"), text_sample("s1", "y"))),
                    (eng(srv.url, "mB", capacity=4), eng(srv.url, "mA", capacity=4)))
    preds = run_engine(run, PermitPool(4))
    assert [(p.sample_id, p.model_name) for p in preds] == [
        ("s1", "mA"), ("s1", "mB"), ("s2", "mA"), ("s2", "mB")
    ]
    assert all(p.error is None and p.attempts == 1 for p in preds)
    assert run.finished_at >= run.started_at


def test_always_failing_with_one_retry(mock_server):
    srv = mock_server(fail_prob=1.0)
    run = EngineRun(task(), Shard("a", tuple(text_sample(f"s{k}", "x") for k in range(3))),
                    (eng(srv.url, retry_limit=1),))
    preds = run_engine(run, PermitPool(2))
    assert len(preds) == 3
    for p in preds:
        assert p.error and "HttpStatusError" in p.error and p.turn_outputs == []
        assert p.attempts == 2


def test_pool_limit_one(mock_server):
    srv = mock_server(latency_s=0.02)
    run = EngineRun(task(), Shard("a", tuple(text_sample(f"s{k}", "x") for k in range(6))),
                    (eng(srv.url, "m1", capacity=8), eng(srv.url, "m2", capacity=8)))
    preds = run_engine(run, PermitPool(1))
    assert len(preds) == 12 and not any(p.error for p in preds)
    assert srv.stats()["max_concurrent_observed"] == 1


def test_endpoint_capacity_caps_concurrency(mock_server):
    srv = mock_server(latency_s=0.05)
    ep = eng(srv.url, capacity=2)
    run = EngineRun(task(), Shard("a", tuple(text_sample(f"s{k}", "x") for k in range(8))), (ep,))
    run_engine(run, PermitPool(10), endpoint_pools={"m": PermitPool(2)})
    assert srv.stats()["max_concurrent_observed"] == 2


def test_three_turn_chains(mock_server):
    srv = mock_server()
    samples = tuple(text_sample(f"s{k}", "one", "two", "three") for k in range(4))
    run = EngineRun(task(multi_turn=True), Shard("a", samples), (eng(srv.url, capacity=4),))
    preds = run_engine(run, PermitPool(4))
    assert all(p.turn_outputs == ["one", "two", "three"] for p in preds)
    assert scripted_turn_check(srv, [1, 3, 5])


def test_single_turn_task_folds_turns(mock_server):
    srv = mock_server()
    run = EngineRun(task(), Shard("a", (text_sample("s", "one", "two"),)), (eng(srv.url),))
    (pred,) = run_engine(run, PermitPool(1))
    assert pred.turn_outputs == ["one two"]
    assert scripted_turn_check(srv, [1])


def test_failure_at_turn_two(mock_server):
    srv = mock_server(response_script={})
    calls = []

    def sender(ep, request, timeout_s, sample_key=None):
        from audioeval.client import send_request
        from audioeval.errors import HttpStatusError

        calls.append(len(request["messages"]))
        if len(request["messages"]) == 3:
            raise HttpStatusError(500, "boom")
        return send_request(ep, request, timeout_s, sample_key)

    model = eng(srv.url)
    s = text_sample("s", "one", "two", "three")
    t = task(multi_turn=True)
    with pytest.raises(ChainError) as info:
        run_multi_turn(s, model, t, resolve_effective_settings(t, model), [PermitPool(1)], sender)
    assert info.value.outputs == ["one", None]
    assert info.value.turn_index == 1
    assert calls == [1, 3]  # turn 3 never sent

    run = EngineRun(t, Shard("a", (s,)), (model,))
    (pred,) = run_engine(run, PermitPool(1), sender=sender)
    assert pred.error.startswith("turn 2:") and pred.turn_outputs == []


def test_audio_turns_are_sent(mock_server, tmp_path):
    srv = mock_server()
    write_wav(tmp_path / "a.wav", 3.0)
    s = SampleRecord("s", (AudioRef(str(tmp_path / "a.wav"), 3.0),), (Turn("user", "hear", 0),),
                     ReferenceTarget("plain_text", "x"))
    run = EngineRun(task(), Shard("a", (s,)), (eng(srv.url, audio_chunk_s=1.0),))
    (pred,) = run_engine(run, PermitPool(1))
    assert pred.error is None and pred.audio_duration_s == 3.0
    # 3 chunks of one second: 3 * (44-byte header + 32000 bytes PCM)
    assert srv.stats()["per_request_log"][0]["audio_bytes"] == pytest.approx(3 * 32044, abs=6)


def test_bad_audio_is_recorded_not_raised(mock_server, tmp_path):
    srv = mock_server()
    write_wav(tmp_path / "st.wav", 0.2, channels=2)
    s = SampleRecord("s", (AudioRef(str(tmp_path / "st.wav"), 0.2),), (Turn("user", None, 0),),
                     ReferenceTarget("plain_text", "x"))
    (pred,) = run_engine(EngineRun(task(), Shard("a", (s,)), (eng(srv.url),)), PermitPool(1))
    assert "FormatError" in pred.error and pred.attempts == 1
    assert srv.stats()["requests_received"] == 0


def test_stagger_delays_later_models(mock_server):
    srv = mock_server()
    models = tuple(eng(srv.url, f"m{k}", capacity=2) for k in range(3))
    run = EngineRun(task(), Shard("a", (text_sample("s", "x"),)), models)
    run_engine(run, PermitPool(8), stagger_ms=100)
    arrivals = {e["model"]: e["arrival_s"] for e in srv.stats()["per_request_log"]}
    assert arrivals["m1"] - arrivals["m0"] >= 0.09
    assert arrivals["m2"] - arrivals["m0"] >= 0.19


def test_parallel_wall_clock(mock_server):
    """Pool >= models x samples: everything runs at once, wall close to one latency."""
    srv = mock_server(latency_s=0.4)
    models = tuple(eng(srv.url, f"m{k}", capacity=10) for k in range(2))
    run = EngineRun(task(), Shard("a", tuple(text_sample(f"s{k}", "x") for k in range(5))), models)
    run_engine(run, PermitPool(10))
    assert run.finished_at - run.started_at == pytest.approx(0.4, rel=0.25)


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        run_engine(EngineRun(task(), Shard("a", ()), (eng("http://x"),)), PermitPool(1))
    with pytest.raises(ValueError):
        run_engine(EngineRun(task(), Shard("a", (text_sample("s", "x"),)), ()), PermitPool(1))
