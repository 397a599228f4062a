"""Correctness pipeline: templates, infills, buckets, oracle, flag rule."""

import itertools
import json
import random

import pytest

from toolprobe.agent import AgentTrace
from toolprobe.canon import canonical_args
from toolprobe.correctness import (
    ConsistencyBuckets,
    CorrectnessFlag,
    CorrectnessParams,
    InfillSet,
    NO_CALL_KEY,
    OracleVerdict,
    PromptSet,
    PromptSetError,
    PromptTemplate,
    bucket_consistency,
    build_expectation,
    evaluate_prompt_set,
    flag_prompt_set,
    generate_infills,
    generate_templates,
    humanize,
    instantiate_prompt_set,
    oracle_evaluate,
    run_correctness_campaign,
)
from toolprobe.tools import ToolInvocation, ToolOutcome

from conftest import LOOKUP_TOOL, MAP_TOOL, lookup_script, scripted_gateway


class TestTemplateTypes:
    def test_mask_extraction(self):
        template = PromptTemplate.from_text("What is the distance from [A] to [B]?")
        assert template.masks == ("A", "B")

    def test_mask_mismatch_rejected(self):
        with pytest.raises(PromptSetError):
            PromptTemplate("What is [A]?", ("A", "B"))

    def test_substitute(self):
        template = PromptTemplate.from_text("From [A] to [B]?")
        assert template.substitute({"A": "x", "B": "y"}) == "From x to y?"

    def test_infills_need_two_per_mask(self):
        with pytest.raises(PromptSetError):
            InfillSet({"A": ("only-one",)})

    def test_combination_count(self):
        infills = InfillSet({"A": ("a", "b", "c"), "B": ("x", "y")})
        assert infills.combination_count() == 6

    def test_prompt_set_needs_two_prompts(self):
        template = PromptTemplate.from_text("Who is [A]?")
        with pytest.raises(PromptSetError):
            PromptSet(template, ("Who is x?",), ({"A": "x"},))

    def test_prompt_set_provenance_enforced(self):
        template = PromptTemplate.from_text("Who is [A]?")
        with pytest.raises(PromptSetError):
            PromptSet(template, ("Who is x?", "unrelated"), ({"A": "x"}, {"A": "y"}))


class TestGeneration:
    def test_generate_templates_discards_maskless(self):
        replies = iter([
            json.dumps({"templates": ["no masks here", "Who is [A]?", "From [A] to [B]?"]}),
            json.dumps({"templates": ["What about [C]?"]}),
        ])
        gateway = scripted_gateway(lambda req: next(replies))
        templates = generate_templates(LOOKUP_TOOL, None, 3, gateway)
        assert [t.text for t in templates] == ["Who is [A]?", "From [A] to [B]?", "What about [C]?"]

    def test_generate_infills_excludes_used_values(self):
        gateway = scripted_gateway(lambda req: json.dumps(
            {"infills": {"A": ["Paris", "paris", "City of Paris", "Lutetia"]}}))
        template = PromptTemplate.from_text("Who is [A]?")
        infills = generate_infills(template, LOOKUP_TOOL, ["PARIS"], gateway)
        assert infills.by_mask["A"] == ("City of Paris", "Lutetia")

    def test_generate_infills_too_few_raises(self):
        gateway = scripted_gateway(lambda req: json.dumps({"infills": {"A": ["only"]}}))
        template = PromptTemplate.from_text("Who is [A]?")
        with pytest.raises(PromptSetError):
            generate_infills(template, LOOKUP_TOOL, [], gateway)

    def test_instantiate_is_seeded_and_without_replacement(self):
        template = PromptTemplate.from_text("From [A] to [B]?")
        infills = InfillSet({"A": ("a", "b", "c"), "B": ("x", "y")})
        first = instantiate_prompt_set(template, infills, 4, seed=7)
        second = instantiate_prompt_set(template, infills, 4, seed=7)
        assert first.prompts == second.prompts
        assert len(set(first.prompts)) == 4
        other = instantiate_prompt_set(template, infills, 4, seed=8)
        assert other.prompts != first.prompts

    def test_instantiate_rejects_oversampling(self):
        template = PromptTemplate.from_text("Who is [A]?")
        infills = InfillSet({"A": ("a", "b")})
        with pytest.raises(PromptSetError):
            instantiate_prompt_set(template, infills, 3, seed=1)

    def test_humanize_mismatch_keeps_originals(self):
        template = PromptTemplate.from_text("Who is [A]?")
        prompt_set = PromptSet(template, ("Who is a?", "Who is b?"), ({"A": "a"}, {"A": "b"}))
        gateway = scripted_gateway(lambda req: json.dumps({"prompts": ["just one"]}))
        assert humanize(prompt_set, LOOKUP_TOOL, gateway).prompts == prompt_set.prompts

    def test_humanize_preserves_provenance(self):
        template = PromptTemplate.from_text("Who is [A]?")
        prompt_set = PromptSet(template, ("Who is a?", "Who is b?"), ({"A": "a"}, {"A": "b"}))
        gateway = scripted_gateway(lambda req: json.dumps({"prompts": ["Hey, who is a?", "who's b again?"]}))
        rewritten = humanize(prompt_set, LOOKUP_TOOL, gateway)
        assert rewritten.prompts == ("Hey, who is a?", "who's b again?")
        assert rewritten.raw_prompts == prompt_set.prompts


def trace_with_calls(arg_maps, outputs, tool_name="lookup"):
    steps = tuple(
        (ToolInvocation(tool_name, args, ordinal=i), ToolOutcome.success(output))
        for i, (args, output) in enumerate(zip(arg_maps, outputs))
    )
    return AgentTrace("q", steps, "answer", "answer")


def no_call_trace():
    return AgentTrace("q", (), "answer from memory", "answer")


class TestBuckets:
    def test_all_same(self):
        traces = [trace_with_calls([{"a": 1}], ["x"]) for _ in range(3)]
        buckets = bucket_consistency(traces, LOOKUP_TOOL)
        assert buckets.input_buckets == ((1, 2, 3),)
        assert not buckets.input_check_failed and not buckets.output_check_failed

    def test_split_inputs_same_outputs(self):
        traces = [
            trace_with_calls([{"a": 1}], ["same"]),
            trace_with_calls([{"a": 2}], ["same"]),
        ]
        buckets = bucket_consistency(traces, LOOKUP_TOOL)
        assert buckets.input_check_failed and not buckets.output_check_failed

    def test_no_call_goes_to_sentinel_bucket(self):
        traces = [trace_with_calls([{"a": 1}], ["x"]), no_call_trace()]
        buckets = bucket_consistency(traces, LOOKUP_TOOL)
        assert buckets.input_check_failed
        assert (2,) in buckets.input_buckets

    def test_multi_call_sequences_compared_in_order(self):
        first = trace_with_calls([{"a": 1}, {"a": 2}], ["x", "y"])
        second = trace_with_calls([{"a": 2}, {"a": 1}], ["y", "x"])
        buckets = bucket_consistency([first, second], LOOKUP_TOOL)
        assert buckets.input_check_failed


class TestOracle:
    def test_verdict_thresholds(self):
        passing = OracleVerdict("e", (6, 10, 7), ("", "", ""))
        failing = OracleVerdict("e", (6, 5, 10), ("", "", ""))
        assert passing.passed and not passing.failed
        assert failing.failed and not failing.passed

    def test_score_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            OracleVerdict("e", (0,), ("",))

    def test_oracle_evaluate_retries_on_bad_score(self):
        replies = iter([
            json.dumps({"correctness_degree": 42, "reason": "oops"}),
            json.dumps({"correctness_degree": 7, "reason": "fine"}),
        ])
        gateway = scripted_gateway(lambda req: next(replies))
        score, reason = oracle_evaluate(no_call_trace(), "out", "expected", gateway)
        assert score == 7 and reason == "fine"

    def test_build_expectation_distinct_votes(self):
        seen = []

        def fn(request):
            body = request.messages[-1][1]
            if "You are emulating" in body:
                seen.append(request.messages[0][1])
                return json.dumps({"answers": ["a sentence"]})
            return json.dumps({"expectation": "combined"})

        template = PromptTemplate.from_text("Who is [A]?")
        prompt_set = PromptSet(template, ("Who is a?", "Who is b?"), ({"A": "a"}, {"A": "b"}))
        result = build_expectation(prompt_set, LOOKUP_TOOL, 3, scripted_gateway(fn))
        assert result == "combined"
        assert len(seen) == 6 and len(set(seen)) == 3  # vote index makes requests distinct


class TestFlagRule:
    def test_truth_table_exhaustive(self):
        for inputs, outputs, oracle in itertools.product((False, True), repeat=3):
            flag = CorrectnessFlag(inputs, outputs, oracle)
            assert flag.flagged == (inputs and outputs and oracle)

    def test_flag_prompt_set_wiring(self):
        split = ConsistencyBuckets(((1,), (2,)), ((1,), (2,)))
        together = ConsistencyBuckets(((1, 2),), ((1, 2),))
        bad = OracleVerdict("e", (2, 2), ("", ""))
        good = OracleVerdict("e", (9, 9), ("", ""))
        assert flag_prompt_set(split, bad).flagged
        assert not flag_prompt_set(together, bad).flagged
        assert not flag_prompt_set(split, good).flagged


class TestRefinementProperty:
    def test_input_buckets_refine_output_buckets_on_deterministic_tools(self):
        """For a deterministic tool, equal input sequences imply equal output
        sequences, so every input bucket lies inside one output bucket."""
        rng = random.Random(42)
        violations = 0
        for _ in range(100):
            arg_pool = [{"topic": f"t{i}"} for i in range(rng.randint(1, 4))]
            salt = rng.randint(0, 10**6)
            traces = []
            for _ in range(rng.randint(2, 7)):
                if rng.random() < 0.2:
                    traces.append(no_call_trace())
                    continue
                calls = [rng.choice(arg_pool) for _ in range(rng.randint(1, 3))]
                outputs = [f"out:{salt}:{canonical_args(args)}" for args in calls]
                traces.append(trace_with_calls(calls, outputs))
            buckets = bucket_consistency(traces, LOOKUP_TOOL)
            output_sets = [set(b) for b in buckets.output_buckets]
            for input_bucket in buckets.input_buckets:
                if not any(set(input_bucket) <= out for out in output_sets):
                    violations += 1
        assert violations == 0


class TestCampaign:
    def test_lookup_campaign_runs_and_persists(self, lookup_registry, tmp_path):
        gateway = scripted_gateway(lookup_script)
        params = CorrectnessParams(seed=7)
        results = run_correctness_campaign(LOOKUP_TOOL, lookup_registry, params, gateway, tmp_path)
        assert len(results) == 3
        assert all(not r.flag.flagged for r in results)
        set_files = sorted((tmp_path / "sets").glob("set_*.json"))
        assert len(set_files) == 3
        summary = json.loads((tmp_path / "correctness_summary.json").read_text())
        assert summary == {"tool_name": "lookup", "sets": 3, "flagged": 0}

    def test_evaluate_prompt_set_shapes(self, lookup_registry):
        gateway = scripted_gateway(lookup_script)
        template = PromptTemplate.from_text("Who is [A]?")
        prompt_set = PromptSet(
            template,
            ("Who is Ada Lovelace?", "Who is Lady Lovelace?"),
            ({"A": "Ada Lovelace"}, {"A": "Lady Lovelace"}),
        )
        result = evaluate_prompt_set(prompt_set, LOOKUP_TOOL, lookup_registry, gateway, votes=2)
        assert len(result.traces) == 2
        assert len(result.verdict.per_prompt_scores) == 2
        record = result.to_dict()
        assert record["flagged"] is False
        assert record["prompts"] == list(prompt_set.prompts)
