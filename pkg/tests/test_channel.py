import json

import pytest

from causalsynth.channel import (
    BackdoorChannelConfig,
    CANONICAL_LINE,
    DOCUMENT_HEAD,
    DOCUMENT_TAIL,
    HttpEndpointConfig,
    HttpRealizer,
    Mismatch,
    TemplateRealizer,
    append_feedback,
    construct_prompt,
    realize_backdoor,
    realize_http,
    realize_template,
)
from causalsynth.errors import (
    AuthError,
    EmptyMismatchListError,
    MalformedResponseError,
    NetworkError,
    PriorMissingVariableError,
    RateLimitedError,
    SchemaMismatchError,
)
from causalsynth.rng import channel_stream, noise_stream
from causalsynth.scm import sample_skeleton


@pytest.fixture
def prompt(chain3):
    skeleton = sample_skeleton(chain3, noise_stream(0, 0))
    return skeleton, construct_prompt(skeleton, chain3)


# --------------------------------------------------------------------------
# prompt construction


def test_constraint_lines_follow_declaration_order(prompt, chain3):
    skeleton, built = prompt
    assert [c.variable for c in built.constraint_lines] == list(chain3.names)
    assert [c.index for c in built.constraint_lines] == [1, 2, 3]
    for c in built.constraint_lines:
        assert c.state == skeleton.v[c.variable]


def test_constraint_line_render(prompt):
    _, built = prompt
    line = built.constraint_lines[0]
    rendered = line.render()
    assert rendered == (
        f"[C1] {line.variable}: {line.state}"
        " --- You MUST include this exact value")
    assert rendered in built.render_user()


def test_prompt_renders_system_and_cot(prompt):
    _, built = prompt
    text = built.render()
    assert built.system_text.strip()
    assert built.cot_instruction.strip() in text
    assert built.attempt_index == 1


def test_construct_prompt_rejects_wrong_variables(chain3, coin_pair):
    skeleton = sample_skeleton(chain3, noise_stream(0, 0))
    with pytest.raises(SchemaMismatchError):
        construct_prompt(skeleton, coin_pair)


def test_construct_prompt_rejects_alien_state(chain3):
    skeleton = sample_skeleton(chain3, noise_stream(0, 0))
    bad = skeleton.__class__(v={**skeleton.v, "B": "sideways"}, u=skeleton.u)
    with pytest.raises(SchemaMismatchError):
        construct_prompt(bad, chain3)


# --------------------------------------------------------------------------
# feedback


def test_append_feedback_block_wording(prompt):
    _, built = prompt
    fed = append_feedback(built, [Mismatch("B", "on", "off")])
    assert fed.attempt_index == 2
    assert len(fed.feedback_blocks) == 1
    block = fed.feedback_blocks[0]
    assert "violated 1 constraint(s)" in block
    assert '- B: expected "on", you wrote "off". Rewrite accordingly.' in block
    assert fed.feedback_vars == ("B",)


def test_append_feedback_missing_value_wording(prompt):
    _, built = prompt
    fed = append_feedback(built, [Mismatch("C", "off", None)])
    assert '- C: expected "off", you wrote nothing.' in fed.feedback_blocks[0]


def test_append_feedback_accumulates(prompt):
    _, built = prompt
    fed = append_feedback(built, [Mismatch("B", "on", "off")])
    fed = append_feedback(fed, [Mismatch("C", "off", None),
                                Mismatch("B", "on", "off")])
    assert fed.attempt_index == 3
    assert fed.feedback_vars == ("B", "C")
    assert len(fed.feedback_blocks) == 2
    # original prompt untouched
    assert built.feedback_blocks == ()


def test_append_feedback_requires_mismatches(prompt):
    _, built = prompt
    with pytest.raises(EmptyMismatchListError):
        append_feedback(built, [])


def test_feedback_blocks_render_in_order(prompt):
    _, built = prompt
    fed = append_feedback(built, [Mismatch("B", "on", "off")])
    fed = append_feedback(fed, [Mismatch("C", "off", "on")])
    user = fed.render_user()
    assert user.index("- B:") < user.index("- C:")


# --------------------------------------------------------------------------
# template channel


def test_template_realizer_exact_document(prompt):
    skeleton, built = prompt
    doc = realize_template(built)
    lines = doc.text.splitlines()
    assert lines[0] == DOCUMENT_HEAD
    assert lines[-1] == DOCUMENT_TAIL
    for name, state in skeleton.v.items():
        assert CANONICAL_LINE.format(variable=name, state=state) in lines
    assert doc.realizer_id == "template"
    assert doc.attempt_index == 1


def test_template_adapter_matches_function(prompt):
    _, built = prompt
    direct = realize_template(built)
    adapted = TemplateRealizer().realize(built, channel_stream(0, 0))
    assert adapted.text == direct.text


# --------------------------------------------------------------------------
# simulated channel


def test_backdoor_config_validation():
    with pytest.raises(ValueError):
        BackdoorChannelConfig({}, base_compliance=1.2)
    with pytest.raises(ValueError):
        BackdoorChannelConfig({}, feedback_gain=-0.1)
    with pytest.raises(ValueError):
        BackdoorChannelConfig({}, compliance_cap=0.0)
    with pytest.raises(ValueError):
        BackdoorChannelConfig({}, base_compliance=0.9, compliance_cap=0.8)


def test_backdoor_compliance_formula():
    cfg = BackdoorChannelConfig({}, base_compliance=0.6, feedback_gain=0.2,
                                compliance_cap=0.99)
    assert cfg.compliance("X", 1, False) == 0.6
    assert cfg.compliance("X", 4, False) == 0.6
    assert cfg.compliance("X", 1, True) == 0.6
    assert cfg.compliance("X", 2, True) == pytest.approx(0.8)
    assert cfg.compliance("X", 3, True) == 0.99
    assert cfg.compliance("X", 9, True) == 0.99


def test_backdoor_requires_full_prior(prompt):
    _, built = prompt
    cfg = BackdoorChannelConfig({"A": "on"})
    with pytest.raises(PriorMissingVariableError):
        realize_backdoor(built, cfg, channel_stream(0, 0))


def test_backdoor_zero_compliance_emits_prior(prompt, chain3):
    skeleton, built = prompt
    prior = {"A": "off", "B": "off", "C": "off"}
    cfg = BackdoorChannelConfig(prior, base_compliance=0.0, feedback_gain=0.0,
                                compliance_cap=0.5)
    doc = realize_backdoor(built, cfg, channel_stream(0, 0))
    for name in chain3.names:
        assert CANONICAL_LINE.format(variable=name, state="off") in doc.text


def test_backdoor_full_compliance_matches_template(prompt):
    _, built = prompt
    cfg = BackdoorChannelConfig({"A": "off", "B": "off", "C": "off"},
                                base_compliance=1.0, feedback_gain=0.0,
                                compliance_cap=1.0)
    assert realize_backdoor(built, cfg, channel_stream(0, 0)).text == \
        realize_template(built).text


def test_backdoor_consumes_one_uniform_per_line(prompt):
    """Deterministic replay: same stream position, same document."""
    _, built = prompt
    cfg = BackdoorChannelConfig({"A": "off", "B": "off", "C": "off"},
                                base_compliance=0.5)
    stream = channel_stream(9, 9)
    first = realize_backdoor(built, cfg, stream)
    # after 3 lines the stream has advanced exactly 3 draws
    probe = channel_stream(9, 9)
    for _ in range(3):
        probe.uniform()
    assert stream.uniform() == probe.uniform()
    again = realize_backdoor(built, cfg, channel_stream(9, 9))
    assert again.text == first.text


def test_backdoor_boost_applies_only_to_fed_variables(prompt):
    _, built = prompt
    cfg = BackdoorChannelConfig({"A": "off", "B": "off", "C": "off"},
                                base_compliance=0.3, feedback_gain=0.6,
                                compliance_cap=1.0)
    fed = append_feedback(built, [Mismatch("B", "on", "off")])
    # draw the three uniforms the channel will see
    probe = channel_stream(2, 2)
    us = [probe.uniform() for _ in range(3)]
    doc = realize_backdoor(fed, cfg, channel_stream(2, 2))
    want = {}
    for u, line in zip(us, fed.constraint_lines):
        c = 0.9 if line.variable == "B" else 0.3
        want[line.variable] = line.state if u < c else "off"
    for name, state in want.items():
        assert CANONICAL_LINE.format(variable=name, state=state) in doc.text


# --------------------------------------------------------------------------
# http channel


def ok_body(content="A = on\nB = on\nC = on"):
    return json.dumps({"choices": [{"message": {"content": content}}]})


def test_http_success(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test/v1", model="m1")
    calls = []

    def transport(url, headers, payload, timeout):
        calls.append((url, headers, payload, timeout))
        return 200, ok_body()

    doc = realize_http(built, cfg, transport=transport, api_key="k-123")
    assert doc.text.startswith("A = on")
    assert doc.realizer_id == "http:m1"
    url, headers, payload, timeout = calls[0]
    assert url == "https://x.test/v1"
    assert headers["Authorization"] == "Bearer k-123"
    assert payload["model"] == "m1"
    assert payload["messages"][0]["role"] == "system"
    assert "[C1]" in payload["messages"][1]["content"]
    assert timeout == 30.0


def test_http_api_key_from_environment(prompt, monkeypatch):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m")
    seen = {}

    def transport(url, headers, payload, timeout):
        seen.update(headers)
        return 200, ok_body()

    monkeypatch.setenv("CAUSALSYNTH_API_KEY", "env-key")
    realize_http(built, cfg, transport=transport)
    assert seen["Authorization"] == "Bearer env-key"


def test_http_auth_failure_is_immediate(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m")
    calls = []

    def transport(url, headers, payload, timeout):
        calls.append(1)
        return 401, ""

    with pytest.raises(AuthError):
        realize_http(built, cfg, transport=transport, sleep=lambda s: None)
    assert len(calls) == 1


def test_http_rate_limit_retries_then_surfaces(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m", max_retries=3,
                             backoff_base=0.5)
    calls = []
    naps = []

    def transport(url, headers, payload, timeout):
        calls.append(1)
        return 429, ""

    with pytest.raises(RateLimitedError):
        realize_http(built, cfg, transport=transport, sleep=naps.append)
    assert len(calls) == 4  # initial try plus three retries
    assert naps == [0.5, 1.0, 2.0]


def test_http_server_error_retries_then_recovers(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m")
    responses = [(500, ""), (503, ""), (200, ok_body("B = off"))]

    def transport(url, headers, payload, timeout):
        return responses.pop(0)

    doc = realize_http(built, cfg, transport=transport, sleep=lambda s: None)
    assert doc.text == "B = off"


def test_http_network_error_counts_as_retry(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m", max_retries=1)
    calls = []

    def transport(url, headers, payload, timeout):
        calls.append(1)
        raise NetworkError("connection reset")

    with pytest.raises(NetworkError):
        realize_http(built, cfg, transport=transport, sleep=lambda s: None)
    assert len(calls) == 2


def test_http_malformed_payloads(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m")
    for body in ("not json", "{}", json.dumps({"choices": []}),
                 json.dumps({"choices": [{"message": {"content": "  "}}]})):
        with pytest.raises(MalformedResponseError):
            realize_http(built, cfg, transport=lambda *a, body=body: (200, body))
    with pytest.raises(MalformedResponseError):
        realize_http(built, cfg, transport=lambda *a: (418, ""))


def test_http_realizer_rate_limiter_paces(prompt):
    _, built = prompt
    naps = []
    cfg = HttpEndpointConfig(url="https://x.test", model="m", rate_per_sec=2.0)
    realizer = HttpRealizer(cfg, transport=lambda *a: (200, ok_body()),
                            sleep=naps.append)
    for _ in range(4):
        realizer.realize(built, channel_stream(0, 0))
    # bucket starts with 2 tokens; later calls must wait about half a second
    assert len(naps) >= 1
    assert all(0.0 < nap <= 0.51 for nap in naps)


def test_http_max_tokens_included_when_set(prompt):
    _, built = prompt
    cfg = HttpEndpointConfig(url="https://x.test", model="m", max_tokens=64)
    seen = {}

    def transport(url, headers, payload, timeout):
        seen.update(payload)
        return 200, ok_body()

    realize_http(built, cfg, transport=transport)
    assert seen["max_tokens"] == 64
