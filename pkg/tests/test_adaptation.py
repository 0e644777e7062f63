from __future__ import annotations

import json

import pytest

from karabo import adaptation
from karabo.adaptation import (
    STAGE_DECLINICAL,
    STAGE_FAITH,
    STAGE_PROVERB,
    STAGE_SIMPLIFY,
    STAGE_UBUNTU,
    STAGES,
    AdaptationConfig,
    MonitorStats,
    ProverbRegistry,
    inject_ubuntu,
    integrate_faith,
    integrate_proverb,
    remove_clinical_terms,
    run_pipeline,
    serialize_traces,
    simplify_language,
    stage_rng,
)
from karabo.corpus import serialize_instances
from karabo.errors import ConfigError
from karabo.evaluation import detect_clinical_terms
from karabo.gateway import ConstantBackend, Gateway

from conftest import CounselorRewriteBackend, ScriptedRandom, make_instances

SUITABILITY_MARKER = "Is this proverb suitable"


def gw(backend) -> Gateway:
    return Gateway(backend)


def registry(n: int = 10) -> ProverbRegistry:
    return ProverbRegistry([f"proverb number {i}" for i in range(1, n + 1)])


class TestConfigAndRegistry:
    def test_threshold_validation(self):
        with pytest.raises(ConfigError):
            AdaptationConfig(faith_threshold=1.5).validate()
        with pytest.raises(ConfigError):
            AdaptationConfig(proverb_threshold=-0.1).validate()
        with pytest.raises(ConfigError):
            AdaptationConfig(max_proverb_attempts=0).validate()
        AdaptationConfig().validate()

    def test_enabled_stage_needs_template(self):
        config = AdaptationConfig(templates={**adaptation.DEFAULT_TEMPLATES, STAGE_UBUNTU: " "})
        with pytest.raises(ConfigError, match="template"):
            config.validate()

    def test_registry_validation(self):
        with pytest.raises(ConfigError):
            ProverbRegistry([])
        with pytest.raises(ConfigError):
            ProverbRegistry(["a", " "])
        with pytest.raises(ConfigError):
            ProverbRegistry(["same", "same"])
        reg = registry(3)
        assert len(reg) == 3
        assert reg.get(1) == "proverb number 1"
        with pytest.raises(IndexError):
            reg.get(0)
        with pytest.raises(IndexError):
            reg.get(4)

    def test_registry_load_json_and_numbered_text(self, tmp_path):
        json_path = tmp_path / "p.json"
        json_path.write_text(json.dumps(["alpha", "beta"]), encoding="utf-8")
        assert ProverbRegistry.load(json_path).entries() == ["alpha", "beta"]

        text_path = tmp_path / "p.txt"
        text_path.write_text("1. one proverb\n2. two proverb\n\nbare line\n", encoding="utf-8")
        assert ProverbRegistry.load(text_path).entries() == [
            "one proverb",
            "two proverb",
            "bare line",
        ]

    def test_default_registry_is_dense_and_replaceable(self):
        reg = ProverbRegistry.default()
        assert len(reg) == 100
        assert reg.get(100)


class TestRewriteStages:
    def test_ubuntu_appends_and_client_untouched(self):
        inst = make_instances(1)[0]
        backend = CounselorRewriteBackend(lambda t: t + " [ubuntu]")
        adapted, entry = inject_ubuntu(inst, AdaptationConfig(), gw(backend))
        assert adapted.counselor_text == inst.counselor_text + " [ubuntu]"
        assert adapted.client_text == inst.client_text
        assert entry.applied
        assert entry.before_hash != entry.after_hash

    def test_identity_rewrite_not_applied(self):
        inst = make_instances(1)[0]
        adapted, entry = inject_ubuntu(inst, AdaptationConfig(), gw(CounselorRewriteBackend()))
        assert adapted == inst
        assert not entry.applied
        assert entry.before_hash == entry.after_hash

    def test_ubuntu_prompt_names_all_three_pillars(self):
        inst = make_instances(1)[0]
        seen = {}

        def capture(text):
            return text

        backend = CounselorRewriteBackend(capture)
        original_complete = backend.complete

        def complete(request):
            seen["prompt"] = request.last_user_text()
            return original_complete(request)

        backend.complete = complete
        inject_ubuntu(inst, AdaptationConfig(), gw(backend))
        for pillar in ("Connectedness", "Competency", "Consciousness"):
            assert pillar in seen["prompt"]

    def test_simplify_lowercase_applied(self):
        inst = with_counselor(make_instances(1)[0], "Tell Me MORE")
        adapted, entry = simplify_language(inst, AdaptationConfig(), gw(CounselorRewriteBackend(str.lower)))
        assert adapted.counselor_text == "tell me more"
        assert entry.applied

    def test_disabled_stage_passes_through(self):
        inst = make_instances(1)[0]
        toggles = {s: s != STAGE_SIMPLIFY for s in STAGES}
        config = AdaptationConfig(stage_toggles=toggles)
        adapted, entry = simplify_language(inst, config, gw(CounselorRewriteBackend(str.lower)))
        assert adapted == inst
        assert not entry.applied
        assert entry.gate_draw is None
        assert entry.judge_decision is None

    def test_declinical_mapping_and_detector_cross_check(self):
        inst = with_counselor(
            make_instances(1)[0], "Your depression is treatable; depression passes."
        )
        backend = CounselorRewriteBackend(lambda t: t.replace("depression", "heaviness"))
        adapted, entry = remove_clinical_terms(inst, AdaptationConfig(), gw(backend))
        assert "heaviness" in adapted.counselor_text
        assert "depression" not in adapted.counselor_text
        assert entry.applied
        assert detect_clinical_terms(adapted.counselor_text) == []

    def test_declinical_identity_when_nothing_clinical(self):
        inst = with_counselor(make_instances(1)[0], "I hear you; rest tonight.")
        adapted, entry = remove_clinical_terms(inst, AdaptationConfig(), gw(CounselorRewriteBackend()))
        assert not entry.applied
        assert adapted == inst


def with_counselor(inst, text):
    from dataclasses import replace

    return replace(inst, counselor_text=text)


class TestFaithGate:
    def config(self):
        return AdaptationConfig(faith_threshold=0.7)

    def test_judge_yes_draw_under_threshold_applies(self):
        inst = make_instances(1)[0]
        backend = CounselorRewriteBackend(lambda t: t + " (verse)")
        rng = ScriptedRandom(uniforms=[0.65])
        adapted, entry = integrate_faith(inst, self.config(), gw(backend), rng)
        assert entry.judge_decision is True
        assert entry.gate_draw == 0.65
        assert entry.applied
        assert adapted.counselor_text.endswith("(verse)")

    def test_judge_yes_draw_over_threshold_skips(self):
        inst = make_instances(1)[0]
        rng = ScriptedRandom(uniforms=[0.75])
        adapted, entry = integrate_faith(
            inst, self.config(), gw(CounselorRewriteBackend(lambda t: t + "!")), rng
        )
        assert entry.judge_decision is True
        assert entry.gate_draw == 0.75
        assert not entry.applied
        assert adapted == inst

    def test_judge_no_consumes_no_draw(self):
        inst = make_instances(1)[0]
        rng = ScriptedRandom(uniforms=[0.1])
        backend = CounselorRewriteBackend(lambda t: t + "!", default=(0.0, 1.0))
        adapted, entry = integrate_faith(inst, self.config(), gw(backend), rng)
        assert entry.judge_decision is False
        assert entry.gate_draw is None
        assert rng.uniform_calls == 0
        assert adapted == inst

    def test_boundary_draw_equal_to_threshold_applies(self):
        inst = make_instances(1)[0]
        rng = ScriptedRandom(uniforms=[0.7])
        _, entry = integrate_faith(
            inst, self.config(), gw(CounselorRewriteBackend(lambda t: t + "!")), rng
        )
        assert entry.applied


class TestProverbGate:
    def config(self, attempts: int = 3):
        return AdaptationConfig(proverb_threshold=0.8, max_proverb_attempts=attempts)

    def test_happy_path_first_attempt_suitable(self):
        inst = make_instances(1)[0]
        backend = CounselorRewriteBackend(lambda t: t + " (proverb)")
        rng = ScriptedRandom(uniforms=[0.5], ints=[7])
        adapted, entry = integrate_proverb(inst, self.config(), gw(backend), rng, registry())
        assert entry.applied
        assert [a.index for a in entry.proverb_attempts] == [7]
        assert entry.proverb_attempts[0].suitable
        assert adapted.counselor_text.endswith("(proverb)")

    def test_all_attempts_unsuitable_leaves_unchanged(self):
        inst = make_instances(1)[0]
        backend = CounselorRewriteBackend(
            lambda t: t + "!", rules=[(SUITABILITY_MARKER, (0.0, 1.0))]
        )
        rng = ScriptedRandom(uniforms=[0.5], ints=[3, 3, 9])
        adapted, entry = integrate_proverb(inst, self.config(), gw(backend), rng, registry())
        assert not entry.applied
        assert adapted == inst
        assert [a.index for a in entry.proverb_attempts] == [3, 3, 9]
        assert all(not a.suitable for a in entry.proverb_attempts)

    def test_benefit_no_short_circuits(self):
        inst = make_instances(1)[0]
        backend = CounselorRewriteBackend(lambda t: t + "!", default=(0.0, 1.0))
        rng = ScriptedRandom()
        adapted, entry = integrate_proverb(inst, self.config(), gw(backend), rng, registry())
        assert entry.judge_decision is False
        assert rng.uniform_calls == 0 and rng.int_calls == 0
        assert adapted == inst

    def test_gate_fail_draws_no_index(self):
        inst = make_instances(1)[0]
        rng = ScriptedRandom(uniforms=[0.9])
        _, entry = integrate_proverb(
            inst, self.config(), gw(CounselorRewriteBackend(lambda t: t + "!")), rng, registry()
        )
        assert entry.gate_draw == 0.9
        assert not entry.applied
        assert entry.proverb_attempts == []

    def test_suitable_on_second_attempt(self):
        inst = make_instances(1)[0]
        flips = iter([False, True])

        class FlipBackend(CounselorRewriteBackend):
            def judge(self, context, question):
                from karabo.gateway import BooleanVerdict

                if SUITABILITY_MARKER in question:
                    good = next(flips)
                    return BooleanVerdict(p_yes=1.0 if good else 0.0, p_no=0.0 if good else 1.0)
                return BooleanVerdict(p_yes=1.0, p_no=0.0)

        rng = ScriptedRandom(uniforms=[0.1], ints=[2, 5])
        _, entry = integrate_proverb(
            inst, self.config(), gw(FlipBackend(lambda t: t + "!")), rng, registry()
        )
        assert [(a.index, a.suitable) for a in entry.proverb_attempts] == [(2, False), (5, True)]
        assert entry.applied


class TestPipeline:
    def test_empty_input(self):
        result = run_pipeline([], AdaptationConfig(), gw(ConstantBackend(1, 0)), registry())
        assert result.instances == []
        assert result.traces == []
        assert result.stats.total_instances == 0
        assert all(s.eligible == 0 for s in result.stats.per_stage.values())

    def test_identity_mocks_and_judge_no_is_identity(self):
        instances = make_instances(20, seed=3)
        backend = CounselorRewriteBackend(default=(0.0, 1.0))  # identity fn, judge no
        result = run_pipeline(instances, AdaptationConfig(rng_seed=5), gw(backend), registry())
        assert serialize_instances(result.instances) == serialize_instances(instances)
        for trace in result.traces:
            assert len(trace.entries) == len(STAGES)
            assert all(not e.applied for e in trace.entries)

    def test_client_immutability_with_mutating_mocks(self):
        instances = make_instances(100, seed=8)
        backend = CounselorRewriteBackend(lambda t: t + " changed")
        result = run_pipeline(instances, AdaptationConfig(rng_seed=1), gw(backend), registry())
        for before, after in zip(instances, result.instances):
            assert after.client_text == before.client_text

    def test_trace_applied_iff_hash_changed(self):
        instances = make_instances(50, seed=2)
        backend = CounselorRewriteBackend(lambda t: t + "~")
        result = run_pipeline(instances, AdaptationConfig(rng_seed=9), gw(backend), registry())
        for trace in result.traces:
            for entry in trace.entries:
                assert entry.applied == (entry.before_hash != entry.after_hash)

    def test_gate_law_in_traces(self):
        instances = make_instances(200, seed=4)
        backend = CounselorRewriteBackend(lambda t: t + "~")
        config = AdaptationConfig(rng_seed=11)
        result = run_pipeline(instances, config, gw(backend), registry())
        for trace in result.traces:
            for entry in trace.entries:
                if entry.stage == STAGE_FAITH and entry.applied:
                    assert entry.judge_decision is True
                    assert entry.gate_draw is not None
                    assert entry.gate_draw <= config.faith_threshold
                if entry.stage == STAGE_FAITH and entry.judge_decision is True and not entry.applied:
                    assert entry.gate_draw is not None
                    assert entry.gate_draw > config.faith_threshold
                if entry.stage == STAGE_PROVERB and entry.applied:
                    assert entry.judge_decision is True
                    assert entry.gate_draw <= config.proverb_threshold
                    assert entry.proverb_attempts[-1].suitable

    def test_retry_bound_under_always_unsuitable(self):
        instances = make_instances(60, seed=6)
        backend = CounselorRewriteBackend(
            lambda t: t + "~", rules=[(SUITABILITY_MARKER, (0.0, 1.0))]
        )
        config = AdaptationConfig(rng_seed=21, max_proverb_attempts=3)
        result = run_pipeline(instances, config, gw(backend), registry())
        gated = 0
        for trace in result.traces:
            entry = trace.entries[-1]
            assert entry.stage == STAGE_PROVERB
            assert not entry.applied
            if entry.gate_draw is not None and entry.gate_draw <= config.proverb_threshold:
                gated += 1
                assert len(entry.proverb_attempts) == 3
            else:
                assert entry.proverb_attempts == []
        assert gated > 0
        assert result.stats.per_stage[STAGE_PROVERB].applied == 0

    def test_seed_determinism_across_worker_counts(self):
        instances = make_instances(80, seed=14)
        outputs = []
        for workers in (1, 4, 16):
            backend = CounselorRewriteBackend(lambda t: t + " adapted")
            result = run_pipeline(
                instances, AdaptationConfig(rng_seed=77), gw(backend), registry(),
                workers=workers,
            )
            outputs.append(
                (
                    serialize_instances(result.instances),
                    serialize_traces(result.traces),
                    json.dumps(result.stats.to_json_obj(), sort_keys=True),
                )
            )
        assert outputs[0] == outputs[1] == outputs[2]

    def test_stats_funnel_invariant(self):
        instances = make_instances(150, seed=31)
        backend = CounselorRewriteBackend(lambda t: t + "~")
        result = run_pipeline(instances, AdaptationConfig(rng_seed=3), gw(backend), registry())
        for stage in STAGES:
            s = result.stats.per_stage[stage]
            assert s.applied <= s.gated_in <= s.judged_yes <= s.eligible

    def test_provider_error_recorded_per_instance(self):
        from karabo.gateway import Backend, BooleanVerdict, TransientBackendError

        class FailingBackend(Backend):
            name = "fail"

            def complete(self, request):
                raise TransientBackendError("down")

            def judge(self, context, question):
                return BooleanVerdict(1.0, 0.0)

        instances = make_instances(3)
        gateway = Gateway(FailingBackend(), max_retries=0, sleep=lambda _: None)
        result = run_pipeline(instances, AdaptationConfig(), gateway, registry())
        assert len(result.instances) == 3
        for before, after, trace in zip(instances, result.instances, result.traces):
            assert after == before  # unchanged on failure
            assert any(e.error and "E_PROVIDER" in e.error for e in trace.entries)
        assert result.stats.errors == 3

    def test_gate_statistics_converge_to_thresholds(self):
        # Binomial check: 3 sigma at n=10000 is ~0.014 for both gates.
        instances = make_instances(10_000, seed=1000)
        backend = CounselorRewriteBackend(lambda t: t + " x")
        result = run_pipeline(
            instances, AdaptationConfig(rng_seed=20260810), gw(backend), registry()
        )
        faith = result.stats.per_stage[STAGE_FAITH]
        proverb = result.stats.per_stage[STAGE_PROVERB]
        assert faith.eligible == proverb.eligible == 10_000
        assert 0.685 <= faith.fraction_applied() <= 0.715
        assert 0.785 <= proverb.fraction_applied() <= 0.815


class TestStageRng:
    def test_streams_independent_of_each_other(self):
        a = stage_rng(1, "i#0", STAGE_FAITH).random()
        b = stage_rng(1, "i#0", STAGE_PROVERB).random()
        c = stage_rng(1, "i#1", STAGE_FAITH).random()
        d = stage_rng(2, "i#0", STAGE_FAITH).random()
        assert len({a, b, c, d}) == 4

    def test_stream_reproducible(self):
        assert stage_rng(9, "x#3", STAGE_FAITH).random() == stage_rng(9, "x#3", STAGE_FAITH).random()


class TestMonitorStats:
    def test_json_shape(self):
        stats = MonitorStats()
        obj = stats.to_json_obj()
        assert set(obj["per_stage"]) == set(STAGES)
        assert obj["total_instances"] == 0
