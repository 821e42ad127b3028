"""Behaviour mining and norm emergence.

Each agent keeps a base of IF-precondition-THEN-action behaviours mined from
its own (view, action) history, scored by a usage-and-reward fitness that
decays with age. Behaviours held by at least 90% of the society are admitted
to a shared norm base. Emerged norms can be generalised into rules that drop
antecedent features which never change the outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import NormConfig, SimConfig
from .env import EAT, THROW, Observation

MOVE_CLASS, EAT_CLASS, THROW_CLASS = "move", "eat", "throw"

HEALTH_LEVELS = ("low health", "medium health", "high health")
BERRY_LEVELS = ("no berries", "low berries", "medium berries", "high berries")
DAYS_LEVELS = ("low days", "medium days", "high days")


def action_class(action: int) -> str:
    if action == EAT:
        return EAT_CLASS
    if action == THROW:
        return THROW_CLASS
    return MOVE_CLASS


@dataclass(frozen=True)
class ViewThresholds:
    """Cut points that bucket raw observations into qualitative levels."""

    health_low: float
    health_high: float
    days_low: float
    days_high: float

    @classmethod
    def from_sim(cls, config: SimConfig) -> "ViewThresholds":
        spawn = config.spawn_wellbeing
        return cls(
            health_low=0.3 * config.h_initial,
            health_high=0.7 * config.h_initial,
            days_low=spawn / 3.0,
            days_high=2.0 * spawn / 3.0,
        )


def _health_level(health: float, th: ViewThresholds) -> str:
    if health < th.health_low:
        return HEALTH_LEVELS[0]
    if health < th.health_high:
        return HEALTH_LEVELS[1]
    return HEALTH_LEVELS[2]


def _berries_level(count: int) -> str:
    if count == 0:
        return BERRY_LEVELS[0]
    if count == 1:
        return BERRY_LEVELS[1]
    if count <= 4:
        return BERRY_LEVELS[2]
    return BERRY_LEVELS[3]


def _days_level(days: float, th: ViewThresholds) -> str:
    if days < th.days_low:
        return DAYS_LEVELS[0]
    if days < th.days_high:
        return DAYS_LEVELS[1]
    return DAYS_LEVELS[2]


def make_view(obs: Observation, agent_id: int, thresholds: ViewThresholds) -> tuple[str, ...]:
    """Discretise an observation into the behaviour precondition.

    Features, in order: own health level, own berry level, then the days
    level of every other agent by ascending id.
    """
    view = [_health_level(obs.own_health, thresholds), _berries_level(obs.own_bag)]
    for i, days in enumerate(obs.wellbeing):
        if i != agent_id:
            view.append(_days_level(days, thresholds))
    return tuple(view)


@dataclass
class Behaviour:
    view: tuple[str, ...]
    act: str
    num: int = 1
    r_acc: float = 0.0
    age: int = 0


def fitness(behaviour: Behaviour, decay_rate: float) -> float:
    """Usage count times accumulated shaped reward, decayed by age."""
    return behaviour.num * behaviour.r_acc * decay_rate ** behaviour.age


class BehaviourBase:
    """One agent's mined behaviours, keyed by (view, action class)."""

    def __init__(self, config: NormConfig):
        self.config = config
        self.behaviours: dict[tuple, Behaviour] = {}

    def __len__(self) -> int:
        return len(self.behaviours)

    def record(self, view: tuple[str, ...], act: str, reward: float) -> None:
        key = (view, act)
        entry = self.behaviours.get(key)
        if entry is None:
            self.behaviours[key] = Behaviour(view=view, act=act, num=1, r_acc=reward, age=0)
        else:
            entry.num += 1
            entry.r_acc += reward

    def age_all(self) -> None:
        for entry in self.behaviours.values():
            entry.age += 1

    def clip(self, step: int) -> None:
        """Drop the least fit behaviours when over capacity, on the clip cadence.

        Ties in fitness evict the older behaviour first.
        """
        if step % self.config.clip_behaviours_every != 0:
            return
        excess = len(self.behaviours) - self.config.max_behaviours
        if excess <= 0:
            return
        ranked = sorted(
            self.behaviours.items(),
            key=lambda item: (fitness(item[1], self.config.decay_rate), -item[1].age, item[0]),
        )
        for key, _ in ranked[:excess]:
            del self.behaviours[key]


def admission_count(n_agents: int, threshold: float) -> int:
    """Holders needed for emergence: ceiling of threshold * society size."""
    return math.ceil(round(threshold * n_agents, 9))


class NormBase:
    """Society-wide emerged norms with aggregate usage and fitness."""

    def __init__(self, config: NormConfig, n_agents: int):
        self.config = config
        self.n_agents = n_agents
        self.norms: dict[tuple, dict] = {}

    def __len__(self) -> int:
        return len(self.norms)

    def _holders(self, bases) -> dict[tuple, list[Behaviour]]:
        held: dict[tuple, list[Behaviour]] = {}
        for base in bases:
            for key, entry in base.behaviours.items():
                held.setdefault(key, []).append(entry)
        return held

    def update_emerged(self, bases) -> None:
        """Admit every behaviour held by at least the convergence share of agents."""
        needed = admission_count(self.n_agents, self.config.convergence_threshold)
        for key, entries in sorted(self._holders(bases).items()):
            if len(entries) >= needed:
                self.norms[key] = {
                    "num": sum(e.num for e in entries),
                    "fitness": sum(fitness(e, self.config.decay_rate) for e in entries),
                }

    def clip(self, bases, step: int) -> None:
        """On the norm-clip cadence, drop norms that fell below the threshold."""
        if step % self.config.clip_norms_every != 0:
            return
        needed = admission_count(self.n_agents, self.config.convergence_threshold)
        held = self._holders(bases)
        for key in list(self.norms):
            if len(held.get(key, ())) < needed:
                del self.norms[key]


# ---------------------------------------------------------------------------
# Generalisation: aggregate antecedents that always produce the same action
# ---------------------------------------------------------------------------

def _subsumes(pattern, other) -> bool:
    return all(p is None or p == o for p, o in zip(pattern, other))


def _overlaps(pattern, other) -> bool:
    return all(p is None or o is None or p == o for p, o in zip(pattern, other))


def generalise(norm_keys) -> list[tuple[tuple, str]]:
    """Merge rules whose every observed completion maps to the same action.

    Takes (view, act) pairs; returns (pattern, act) rules where dropped
    features are None. A feature is dropped only when at least two distinct
    observed values collapse and no overlapping rule disagrees on the action.
    Single rules are returned unchanged.
    """
    rules = sorted({(tuple(view), act) for view, act in norm_keys})
    if not rules:
        return []
    width = len(rules[0][0])

    changed = True
    while changed:
        changed = False
        for feature in range(width):
            groups: dict[tuple, set] = {}
            for pattern, act in rules:
                masked = pattern[:feature] + (None,) + pattern[feature + 1:]
                groups.setdefault((masked, act), set()).add(pattern[feature])
            for (masked, act), values in sorted(
                    groups.items(), key=lambda kv: (tuple(map(str, kv[0][0])), kv[0][1])):
                concrete = values - {None}
                if len(concrete) < 2:
                    continue
                conflict = any(
                    other_act != act and _overlaps(masked, other_pattern)
                    for other_pattern, other_act in rules
                )
                if conflict:
                    continue
                rules = [
                    (pattern, rule_act)
                    for pattern, rule_act in rules
                    if not (rule_act == act and _subsumes(masked, pattern))
                ]
                rules.append((masked, act))
                rules.sort(key=lambda r: (tuple(map(str, r[0])), r[1]))
                changed = True
                break
            if changed:
                break
    return rules


def decide(rules, view: tuple[str, ...]) -> set[str]:
    """Action classes the generalised rules imply for a full antecedent."""
    return {act for pattern, act in rules if _subsumes(pattern, view)}


# ---------------------------------------------------------------------------
# Dump format: one rule per line, plus an indented generalised tree
# ---------------------------------------------------------------------------

def format_rule(view, act: str, num: int, fit: float) -> str:
    conditions = ", ".join(view)
    return f"IF <{conditions}> THEN <{act}>\t{num}\t{fit!r}"


def parse_rule(line: str) -> tuple[tuple[str, ...], str, int, float]:
    rule, num, fit = line.rstrip("\n").split("\t")
    if not (rule.startswith("IF <") and "> THEN <" in rule and rule.endswith(">")):
        raise ValueError(f"bad rule line: {line!r}")
    conditions, act = rule[len("IF <"):-1].split("> THEN <")
    view = tuple(part.strip() for part in conditions.split(","))
    return view, act, int(num), float(fit)


def format_norm_lines(norms: dict[tuple, dict]) -> list[str]:
    return [
        format_rule(view, act, stats["num"], stats["fitness"])
        for (view, act), stats in sorted(norms.items())
    ]


def format_rule_tree(rules, indent: str = "    ") -> str:
    """Indented text tree over the non-dropped conditions, actions as leaves."""
    tree: dict = {}
    for pattern, act in sorted(rules, key=lambda r: (tuple(map(str, r[0])), r[1])):
        node = tree
        for condition in pattern:
            if condition is None:
                continue
            node = node.setdefault(("cond", condition), {})
        node.setdefault(("act", act), {})

    lines: list[str] = []

    def walk(node: dict, depth: int) -> None:
        for kind, label in sorted(node, key=lambda k: (k[0] == "cond", k[1])):
            if kind == "act":
                lines.append(f"{indent * depth}-> {label}")
            else:
                lines.append(f"{indent * depth}{label}")
                walk(node[(kind, label)], depth + 1)

    walk(tree, 0)
    return "\n".join(lines)
