from __future__ import annotations

import dataclasses
import random
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, compile_files, run, sum_icebox
from harness import DEAD_PREFIX, gp_run, inject_dead, unexecuted_lines
from transplantc.adaptation.gp import (
    DELETE,
    INSERT,
    REPLACE,
    Evaluator,
    Fitness,
    GpConfig,
    GpIndividual,
    gene_distance,
    mutate,
    random_individual,
)
from transplantc.adaptation.host import host_context, resolve_type
from transplantc.adaptation.wrapper import (
    Binding,
    Wrapper,
    WrapperSlot,
    donor_bindings,
    render_wrapper,
    synthesize_wrapper,
)
from transplantc.errors import MarkerAmbiguous, MarkerNotFound, NoViableOrganFound
from transplantc.extractor import ELEMENT, extract_over_organ
from transplantc.frontend import from_texts, load_project
from transplantc.implantation import implant_texts, write_project
from transplantc.suites import TestCase, TestSuite, run_tests

D1 = FIXTURES / "d1"
TINY = FIXTURES / "tiny" / "host"
SMALL = GpConfig(population_size=6, max_generations=10, seeds=(1,), reduction_generations=1)


@pytest.fixture
def setup(d1, tiny_host):
    organ = extract_over_organ(d1, None, "feat_sum", "sum")
    ctx = host_context(tiny_host, "sum")
    return organ, ctx, synthesize_wrapper(organ, ctx)


# -- host context and wrapper ----------------------------------------------------


def test_host_variables_come_from_scope(tiny_host):
    ctx = host_context(tiny_host, "sum")
    assert ctx.insertion_point == ("host.c", "sum", "main")
    assert {(v.name, v.resolved) for v in ctx.visible_variables} == {
        ("argc", "int"), ("argv", "char **"), ("count", "int"),
    }


def test_wrapper_slot_candidates(setup):
    organ, ctx, wrapper = setup
    assert [(s.symbol, s.ctype) for s in wrapper.parameter_slots] == [("n", "int")]
    texts = [c.text for c in wrapper.parameter_slots[0].candidates]
    assert "__h_count" in texts and "__h_argv" not in texts
    assert wrapper.setup_statements == [0]
    assert wrapper.call_statement == "feat_sum(n);"


def test_zero_parameter_entry_gives_bare_call():
    donor = from_texts({"m.c": "#include <stdio.h>\n\nvoid hello(void)\n{\n    puts(\"hi\");\n}\n\n"
                               "int main(void)\n{\n    hello();\n    return 0;\n}\n"})
    host = from_texts({"h.c": "int main(void)\n{\n    /*@transplant:hi*/\n    return 0;\n}\n"})
    organ = extract_over_organ(donor, None, "hello", "hi")
    wrapper = synthesize_wrapper(organ, host_context(host, "hi"))
    assert wrapper.parameter_slots == [] and wrapper.setup_statements == []
    r = render_wrapper(organ, wrapper, [True] * len(organ.statement_array), [])
    assert r.function == "void transplant_hi(void)\n{\n    hello();\n}\n"
    assert r.call_site == "transplant_hi();"


def test_marker_errors():
    two = from_texts({"h.c": "int main(void)\n{\n    /*@transplant:x*/\n    /*@transplant:x*/\n    return 0;\n}\n"})
    with pytest.raises(MarkerAmbiguous):
        host_context(two, "x")
    with pytest.raises(MarkerNotFound):
        host_context(two, "y")


def test_typedefs_resolve_for_compatibility():
    assert resolve_type("size_t", {"size_t": "unsigned long"}) == "unsigned long"
    assert resolve_type("str", {"str": "char *"}) == "char *"
    assert resolve_type("char*", {}) == "char *"


# -- mutation ----------------------------------------------------------------------


def _wrapper(cands: list[int]) -> Wrapper:
    slots = [
        WrapperSlot(f"s{i}", "int", "param", tuple(Binding("zero", str(k)) for k in range(n)))
        for i, n in enumerate(cands)
    ]
    return Wrapper("f", "f", slots, [], "f();")


def test_ten_thousand_mutations_change_exactly_one_gene(setup):
    organ, _, wrapper = setup
    rng = random.Random(2024)
    n = len(organ.statement_array)
    for _ in range(10_000):
        parent = random_individual(n, wrapper, rng)
        child, op = mutate(parent, wrapper, rng)
        assert len(child.mask) == n
        assert gene_distance(parent, child) == 1
        if op == DELETE:
            assert child.statement_count == parent.statement_count - 1
        elif op == INSERT:
            assert child.statement_count == parent.statement_count + 1


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.booleans(), min_size=0, max_size=12),
    st.lists(st.integers(1, 4), max_size=4),
    st.integers(0, 2**32),
)
def test_mutation_property_on_arbitrary_shapes(mask, cands, seed):
    wrapper = _wrapper(cands)
    rng = random.Random(seed)
    ind = GpIndividual(tuple(mask), tuple(rng.randrange(n) for n in cands))
    if not mask and all(n == 1 for n in cands):
        with pytest.raises(ValueError):
            mutate(ind, wrapper, rng)
        return
    child, op = mutate(ind, wrapper, rng)
    assert gene_distance(ind, child) == 1
    assert len(child.mask) == len(mask)
    if op == REPLACE:
        assert child.mask == ind.mask


def test_all_zero_mask_never_deletes():
    wrapper = _wrapper([1])
    ind = GpIndividual((False,) * 5, (0,))
    rng = random.Random(0)
    for _ in range(200):
        child, op = mutate(ind, wrapper, rng, ((DELETE, 100.0), (INSERT, 1.0), (REPLACE, 100.0)))
        assert op == INSERT and gene_distance(ind, child) == 1


def test_single_candidate_slot_never_replaced():
    wrapper = _wrapper([1, 1])
    ind = GpIndividual((True, False), (0, 0))
    rng = random.Random(0)
    ops = {mutate(ind, wrapper, rng, ((REPLACE, 50.0), (INSERT, 1.0), (DELETE, 1.0)))[1] for _ in range(200)}
    assert ops <= {INSERT, DELETE} and ops


# -- fitness ---------------------------------------------------------------------


fitnesses = st.builds(
    lambda c, t, p, n: Fitness(c, min(p, t) if c else 0, t, n),
    st.booleans(), st.integers(0, 5), st.integers(0, 5), st.integers(0, 20),
)


@given(fitnesses, fitnesses, fitnesses)
def test_fitness_order_is_total_and_lexicographic(a, b, c):
    assert (a < b) + (b < a) + (a.key() == b.key()) == 1
    if a <= b and b <= c:
        assert a <= c
    assert (a < b) == ((a.compiled, a.icebox_passed, -a.statement_count) < (b.compiled, b.icebox_passed, -b.statement_count))


def test_fitness_invariants():
    with pytest.raises(ValueError):
        Fitness(True, 3, 2, 1)
    with pytest.raises(ValueError):
        Fitness(False, 1, 2, 1)
    assert Fitness(True, 2, 2, 5) > Fitness(True, 2, 2, 6) > Fitness(True, 1, 2, 1) > Fitness(False, 0, 2, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        GpConfig(population_size=1)
    with pytest.raises(ValueError):
        GpConfig(seeds=())


# -- evaluation --------------------------------------------------------------------


def _evaluator(setup, tiny_host, icebox=None):
    organ, ctx, wrapper = setup
    return Evaluator(organ, wrapper, tiny_host, ctx, icebox or sum_icebox(), SMALL, host_root=str(TINY))


def _binding(wrapper, text):
    return tuple(c.text for c in wrapper.parameter_slots[0].candidates).index(text)


def test_known_good_configuration_passes(setup, tiny_host):
    organ, _, wrapper = setup
    ev = _evaluator(setup, tiny_host)
    ind = GpIndividual((True,) * len(organ.statement_array), (_binding(wrapper, "__h_count"),))
    assert ev(ind) == Fitness(True, 2, 2, len(organ.statement_array))


def test_donor_binding_passes_only_matching_test(setup, tiny_host):
    organ, _, wrapper = setup
    ev = _evaluator(setup, tiny_host)
    ind = GpIndividual((True,) * len(organ.statement_array), tuple(donor_bindings(wrapper)))
    f = ev(ind)
    assert f.compiled and f.icebox_passed == 1


def test_excluding_callee_fails_to_compile(setup, tiny_host):
    organ, _, wrapper = setup
    mask = [True] * len(organ.statement_array)
    add = next(i for i, e in enumerate(organ.statement_array) if e.kind == ELEMENT and e.key == "add")
    mask[add] = False
    f = _evaluator(setup, tiny_host)(GpIndividual(tuple(mask), (_binding(wrapper, "__h_count"),)))
    assert f.compiled is False and f.icebox_passed == 0


def test_type_filter_rejects_before_compiling(setup, tiny_host):
    organ, ctx, wrapper = setup
    argv = next(v for v in ctx.visible_variables if v.name == "argv")
    slot = wrapper.parameter_slots[0]
    bad = dataclasses.replace(slot, candidates=slot.candidates + (Binding("host", "__h_argv", argv),))
    wrapper = dataclasses.replace(wrapper, parameter_slots=[bad])
    ev = Evaluator(organ, wrapper, tiny_host, ctx, sum_icebox(), SMALL, host_root=str(TINY))
    f = ev(GpIndividual((True,) * len(organ.statement_array), (len(bad.candidates) - 1,)))
    assert f.compiled is False and ev.builds == 0


def test_cache_is_content_addressed(setup, tiny_host):
    organ, _, wrapper = setup
    ev = _evaluator(setup, tiny_host)
    ind = GpIndividual((True,) * len(organ.statement_array), (_binding(wrapper, "__h_count"),))
    ev(ind)
    ev(GpIndividual(ind.mask, ind.bindings, (9, 9)))
    assert ev.evaluations == 2 and ev.builds == 1


# -- search ------------------------------------------------------------------------


def test_evolve_finds_and_reduces_organ():
    organ, over, ev = gp_run(D1, TINY, "feat_sum", "sum", sum_icebox(), SMALL)
    assert organ.fitness.viable
    assert organ.statement_count < len(over.statement_array)
    assert "__h_count" in organ.wrapper.function


def test_evolve_is_deterministic():
    a, _, _ = gp_run(D1, TINY, "feat_sum", "sum", sum_icebox(), SMALL)
    b, _, _ = gp_run(D1, TINY, "feat_sum", "sum", sum_icebox(), SMALL)
    assert a.individual == b.individual and a.sources == b.sources and a.wrapper == b.wrapper
    assert a.trajectory == b.trajectory


def test_minimal_forced_organ_converges_in_generation_zero():
    ice = TestSuite("icebox", (TestCase("ice_3", ("3",), None, 0, b"host 3\nsum 6\n"),))
    organ, _, _ = gp_run(D1, TINY, "feat_sum", "sum", ice, SMALL)
    assert organ.generation == 0


def test_dead_statement_is_removed():
    organ, over, _ = gp_run(D1, TINY, "feat_sum", "sum", sum_icebox(), SMALL, dead=1)
    assert any(DEAD_PREFIX in t for t in over.sources.values())
    assert not any(DEAD_PREFIX in t for t in organ.sources.values())
    assert organ.fitness.viable


def test_inject_dead_adds_selectable_statements(d1):
    organ = extract_over_organ(d1, None, "feat_sum", "sum")
    more = inject_dead(organ, 3)
    assert len(more.statement_array) == len(organ.statement_array) + 3
    from_texts(more.sources)  # still parses


def test_wrong_expected_output_gives_no_viable_organ():
    ice = TestSuite("icebox", (TestCase("wrong", ("3",), None, 0, b"host 3\nsum 7\n"),
                               TestCase("ok", ("3",), None, 0, None)))
    cfg = GpConfig(population_size=4, max_generations=2, seeds=(1, 2), reduction_generations=0)
    with pytest.raises(NoViableOrganFound) as exc:
        gp_run(D1, TINY, "feat_sum", "sum", ice, cfg)
    traj = exc.value.trajectory
    assert traj and {t[0] for t in traj} == {1, 2}
    assert max(t[3] for t in traj) < 2


def test_returned_organ_compiles_in_host(tmp_path):
    organ, _, _ = gp_run(D1, TINY, "feat_sum", "sum", sum_icebox(), SMALL)
    host = load_project(TINY)
    post, _ = implant_texts(host, from_texts(organ.sources), "sum", host_context(host, "sum"), organ.wrapper)
    binary = compile_files(post.as_dict(), tmp_path)
    assert run(binary, "5") == "host 5\nsum 15\n"


def test_coverage_oracle_sees_injected_dead_code(tmp_path, d1, tiny_host):
    # the un-reduced organ must show up as unexecuted, or the reduction check proves nothing
    organ = inject_dead(extract_over_organ(d1, None, "feat_sum", "sum"), 3)
    ctx = host_context(tiny_host, "sum")
    wrapper = synthesize_wrapper(organ, ctx)
    bindings = [[c.text for c in s.candidates].index("__h_count") for s in wrapper.parameter_slots]
    rendered = render_wrapper(organ, wrapper, [True] * len(organ.statement_array), bindings)
    post, _ = implant_texts(tiny_host, from_texts(organ.sources), "sum", ctx, rendered)
    root = tmp_path / "p"
    write_project(post, root)
    srcs = sorted(p for p in post.paths if p.endswith(".c"))
    subprocess.run(["cc", "--coverage", "-o", "a.out", *srcs], cwd=root, check=True, capture_output=True)
    assert run_tests(str(root / "a.out"), sum_icebox()).passed == 2
    missed = unexecuted_lines(root, ["main.c", "util.c"])
    assert list(missed) == ["main.c"] and len(missed["main.c"]) == 3
