"""Mutation-only steady-state genetic programming over organ candidates.

An individual is a bit per statement-array entry plus one binding choice per
wrapper slot. Fitness is ordered lexicographically by (compiled, ice-box tests
passed, fewer statements). The first individual that compiles and passes
every ice-box test ends the search phase; a fixed reduction phase then
keeps shrinking it without giving up a single test.
"""

from __future__ import annotations

import hashlib
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..build import DEFAULT_BUILD, build_tree
from ..errors import NoViableOrganFound, SignatureConflict
from ..extractor import OverOrgan
from ..frontend import ProjectModel, from_texts
from ..suites import TestSuite, run_tests
from .host import HostContext, resolve_type, typedef_map
from .sandbox import Sandbox, materialize
from .wrapper import RenderedWrapper, Wrapper, donor_bindings, organ_sources, render_wrapper

INSERT, DELETE, REPLACE = "insert", "delete", "replace"
OPERATORS = (INSERT, DELETE, REPLACE)


@dataclass(frozen=True)
class GpConfig:
    population_size: int = 40
    max_generations: int = 100
    tournament_size: int = 2
    mutation_rates: tuple[tuple[str, float], ...] = ((INSERT, 1.0), (DELETE, 1.0), (REPLACE, 1.0))
    seeds: tuple[int, ...] = (0,)
    evaluation_timeout: float = 5.0
    reduction_generations: int = 3
    jobs: int = 1
    build_command: str = DEFAULT_BUILD

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population size must be at least 2")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.tournament_size < 1:
            raise ValueError("tournament size must be positive")


@dataclass(frozen=True)
class GpIndividual:
    mask: tuple[bool, ...]
    bindings: tuple[int, ...]
    lineage: tuple[int, ...] = ()

    @property
    def statement_count(self) -> int:
        return sum(self.mask)

    def genes(self) -> tuple:
        return self.mask + tuple(self.bindings)


def gene_distance(a: GpIndividual, b: GpIndividual) -> int:
    assert len(a.mask) == len(b.mask) and len(a.bindings) == len(b.bindings)
    return sum(x != y for x, y in zip(a.genes(), b.genes()))


@dataclass(frozen=True, order=False)
class Fitness:
    compiled: bool
    icebox_passed: int
    icebox_total: int
    statement_count: int

    def __post_init__(self):
        if self.icebox_passed > self.icebox_total:
            raise ValueError("passed exceeds total")
        if not self.compiled and self.icebox_passed:
            raise ValueError("an uncompiled candidate cannot pass tests")

    def key(self) -> tuple:
        return (self.compiled, self.icebox_passed, -self.statement_count)

    @property
    def viable(self) -> bool:
        return self.compiled and self.icebox_passed == self.icebox_total

    def __lt__(self, other: "Fitness") -> bool:
        return self.key() < other.key()

    def __le__(self, other: "Fitness") -> bool:
        return self.key() <= other.key()

    def __gt__(self, other: "Fitness") -> bool:
        return self.key() > other.key()

    def __ge__(self, other: "Fitness") -> bool:
        return self.key() >= other.key()


# -- mutation ------------------------------------------------------------------


def _applicable(op: str, ind: GpIndividual, wrapper: Wrapper) -> bool:
    if op == DELETE:
        return any(ind.mask)
    if op == INSERT:
        return not all(ind.mask)
    return any(len(s.candidates) > 1 for s in wrapper.parameter_slots)


def mutate(ind: GpIndividual, wrapper: Wrapper, rng: random.Random,
           rates: Sequence[tuple[str, float]] = GpConfig.mutation_rates) -> tuple[GpIndividual, str]:
    """Apply exactly one operator, resampling until an applicable one is drawn."""
    ops = [op for op, w in rates if w > 0 and _applicable(op, ind, wrapper)]
    if not ops:
        raise ValueError("no mutation operator applies to this individual")
    weights = [w for op, w in rates if op in ops]
    op = rng.choices(ops, weights)[0]
    mask = list(ind.mask)
    bindings = list(ind.bindings)
    if op == DELETE:
        i = rng.choice([k for k, b in enumerate(mask) if b])
        mask[i] = False
    elif op == INSERT:
        i = rng.choice([k for k, b in enumerate(mask) if not b])
        mask[i] = True
    else:
        slots = [k for k, s in enumerate(wrapper.parameter_slots) if len(s.candidates) > 1]
        k = rng.choice(slots)
        choices = [c for c in range(len(wrapper.parameter_slots[k].candidates)) if c != bindings[k]]
        bindings[k] = rng.choice(choices)
    return GpIndividual(tuple(mask), tuple(bindings), ind.lineage), op


def random_individual(n: int, wrapper: Wrapper, rng: random.Random) -> GpIndividual:
    return GpIndividual(
        tuple(rng.random() < 0.5 for _ in range(n)),
        tuple(rng.randrange(len(s.candidates)) for s in wrapper.parameter_slots),
    )


# -- evaluation ----------------------------------------------------------------


@dataclass
class Candidate:
    sources: dict[str, str]
    rendered: RenderedWrapper
    postoperative: ProjectModel | None
    digest: str


class Evaluator:
    """Builds a candidate into a copy of the product base and runs the ice-box
    tests against the resulting host binary. Results are cached by content."""

    def __init__(
        self,
        organ: OverOrgan,
        wrapper: Wrapper,
        host: ProjectModel,
        ctx: HostContext,
        icebox: TestSuite,
        config: GpConfig,
        host_root: str | None = None,
        sandbox_root: str | None = None,
    ):
        self.organ = organ
        self.wrapper = wrapper
        self.host = host
        self.ctx = ctx
        self.icebox = icebox
        self.config = config
        self.host_root = host_root
        self.sandbox_root = sandbox_root
        self.organ_project = organ.project()
        self.organ_typedefs = typedef_map(self.organ_project)
        self.cache: dict[str, Fitness] = {}
        self.evaluations = 0
        self.builds = 0

    def types_ok(self, ind: GpIndividual) -> bool:
        for slot, b in zip(self.wrapper.parameter_slots, ind.bindings):
            c = slot.candidates[b]
            if c.kind == "host" and c.variable.resolved != resolve_type(slot.ctype, self.organ_typedefs):
                return False
        return True

    def candidate(self, ind: GpIndividual) -> Candidate:
        from ..implantation import implant_texts

        sources = organ_sources(self.organ, ind.mask, self.organ_project)
        rendered = render_wrapper(self.organ, self.wrapper, ind.mask, ind.bindings)
        try:
            post, _ = implant_texts(self.host, from_texts(sources), self.organ.feature_id, self.ctx, rendered)
        except SignatureConflict:
            post = None
        h = hashlib.sha256()
        if post is not None:
            for u in post.units:
                h.update(u.path.encode() + b"\0" + u.text.encode() + b"\0")
        else:
            h.update(b"conflict")
        return Candidate(sources, rendered, post, h.hexdigest())

    def __call__(self, ind: GpIndividual) -> Fitness:
        self.evaluations += 1
        total = len(self.icebox.tests)
        count = ind.statement_count
        if not self.types_ok(ind):
            return Fitness(False, 0, total, count)
        cand = self.candidate(ind)
        if cand.postoperative is None:
            return Fitness(False, 0, total, count)
        if cand.digest in self.cache:
            f = self.cache[cand.digest]
            return Fitness(f.compiled, f.icebox_passed, total, count)
        with Sandbox(self.sandbox_root) as tmp:
            materialize(cand.postoperative, tmp, self.host_root)
            self.builds += 1
            b = build_tree(tmp, self.config.build_command)
            if not b.ok:
                f = Fitness(False, 0, total, count)
            else:
                r = run_tests(b.binary, self.icebox, self.config.evaluation_timeout)
                f = Fitness(True, r.passed, total, count)
        self.cache[cand.digest] = f
        return f


# -- search --------------------------------------------------------------------


@dataclass
class Organ:
    feature_id: str
    individual: GpIndividual
    fitness: Fitness
    seed: int
    generation: int
    trajectory: list[tuple]
    sources: dict[str, str]
    wrapper: RenderedWrapper
    evaluations: int = 0

    @property
    def statement_count(self) -> int:
        return self.individual.statement_count


@dataclass
class _Run:
    population: list[GpIndividual] = field(default_factory=list)
    fitness: list[Fitness] = field(default_factory=list)

    def best(self) -> int:
        return max(range(len(self.fitness)), key=lambda i: (self.fitness[i].key(), -i))

    def worst(self, protect: int) -> int:
        idx = [i for i in range(len(self.fitness)) if i != protect]
        return min(idx, key=lambda i: (self.fitness[i].key(), -i))


def _evaluate_all(evaluate: Callable[[GpIndividual], Fitness], inds: list[GpIndividual], jobs: int) -> list[Fitness]:
    if jobs > 1 and len(inds) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(evaluate, inds))  # map keeps index order
    return [evaluate(i) for i in inds]


def _tournament(run: _Run, rng: random.Random, size: int) -> int:
    picks = [rng.randrange(len(run.population)) for _ in range(size)]
    return max(picks, key=lambda i: (run.fitness[i].key(), -i))


def _generation(run: _Run, wrapper: Wrapper, rng: random.Random, config: GpConfig,
                evaluate: Callable[[GpIndividual], Fitness], gen: int) -> None:
    offspring = []
    for _ in range(config.population_size):
        parent = run.population[_tournament(run, rng, config.tournament_size)]
        child, _ = mutate(parent, wrapper, rng, config.mutation_rates)
        offspring.append(GpIndividual(child.mask, child.bindings, parent.lineage + (gen,)))
    fits = _evaluate_all(evaluate, offspring, config.jobs)
    for child, f in zip(offspring, fits):
        w = run.worst(run.best())
        if f >= run.fitness[w]:
            run.population[w] = child
            run.fitness[w] = f


def _sweep(ind: GpIndividual, fit: Fitness, evaluate) -> tuple[GpIndividual, Fitness]:
    """Try deleting each selected entry, last first; keep deletions that lose
    no test. Repeat until a full pass changes nothing."""
    changed = True
    while changed:
        changed = False
        for i in reversed(range(len(ind.mask))):
            if not ind.mask[i]:
                continue
            mask = list(ind.mask)
            mask[i] = False
            trial = GpIndividual(tuple(mask), ind.bindings, ind.lineage)
            f = evaluate(trial)
            if f.viable:
                ind, fit = trial, f
                changed = True
    return ind, fit


def evolve(
    organ: OverOrgan,
    wrapper: Wrapper,
    evaluate: Callable[[GpIndividual], Fitness],
    config: GpConfig,
    sources_of: Callable[[GpIndividual], tuple[dict[str, str], RenderedWrapper]] | None = None,
) -> Organ:
    """Search each seed in turn; return the first viable organ after reduction."""
    n = len(organ.statement_array)
    trajectory: list[tuple] = []
    for seed in config.seeds:
        rng = random.Random(seed)
        start = GpIndividual(tuple([True] * n), tuple(donor_bindings(wrapper)), (seed,))
        pop = [start]
        while len(pop) < config.population_size:
            base = GpIndividual(
                start.mask,
                tuple(rng.randrange(len(s.candidates)) for s in wrapper.parameter_slots),
                (seed,),
            )
            if n or any(len(s.candidates) > 1 for s in wrapper.parameter_slots):
                base, _ = mutate(base, wrapper, rng, config.mutation_rates)
            pop.append(base)
        run = _Run(pop, _evaluate_all(evaluate, pop, config.jobs))
        found_at = None
        for gen in range(config.max_generations + 1):
            b = run.best()
            trajectory.append((seed, gen) + run.fitness[b].key())
            if run.fitness[b].viable:
                found_at = gen
                break
            if gen == config.max_generations:
                break
            _generation(run, wrapper, rng, config, evaluate, gen + 1)
        if found_at is None:
            continue
        for r in range(config.reduction_generations):
            _generation(run, wrapper, rng, config, evaluate, found_at + r + 1)
            b = run.best()
            trajectory.append((seed, found_at + r + 1) + run.fitness[b].key())
        b = run.best()
        ind, fit = _sweep(run.population[b], run.fitness[b], evaluate)
        if sources_of is not None:
            sources, rendered = sources_of(ind)
        else:
            sources, rendered = organ_sources(organ, ind.mask), render_wrapper(organ, wrapper, ind.mask, ind.bindings)
        return Organ(organ.feature_id, ind, fit, seed, found_at, trajectory, sources, rendered,
                     getattr(evaluate, "evaluations", 0))
    best = max(trajectory, key=lambda t: t[2:]) if trajectory else None
    msg = f"no organ passed every ice-box test within {config.max_generations} generations for seeds {list(config.seeds)}"
    if best is not None:
        msg += f"; best compiled={best[2]} passed={best[3]}"
    raise NoViableOrganFound(msg, trajectory)
