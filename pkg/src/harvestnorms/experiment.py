"""Training and evaluation harness: runs societies, computes metrics,
and writes the CSV and norm-dump artifacts."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import metrics
from .agent import HarvestAgent
from .config import (
    BASELINE,
    RAWLE,
    SOCIETY_COLUMN,
    ExperimentConfig,
    SimConfig,
)
from .env import N_ACTIONS, init_episode, n_features, run_step, wellbeing
from .learner import DQNLearner
from .norms import (
    BehaviourBase,
    NormBase,
    ViewThresholds,
    format_norm_lines,
    format_rule_tree,
    generalise,
    parse_rule,
)

# Sub-stream tags for seed derivation; the society is deliberately absent so
# both societies start from identical weights and placements.
_AGENT_STREAM = 1
_ENV_STREAM = 2

TREE_HEADER = "# generalised rule tree"


def epsilon_schedule(episode: int, train_episodes: int, start: float, final: float) -> float:
    """Linear decay from start to final across the training budget."""
    if train_episodes <= 1:
        return final
    frac = min(episode / (train_episodes - 1), 1.0)
    return start + (final - start) * frac


@dataclass(frozen=True)
class EpisodeMetrics:
    """Per-episode means of the per-step society metrics."""

    gini_wellbeing: float
    min_wellbeing: float
    welfare_wellbeing: float
    gini_resource: float
    min_resource: float
    welfare_resource: float
    length: int

    FIELDS = (
        "gini_wellbeing", "min_wellbeing", "welfare_wellbeing",
        "gini_resource", "min_resource", "welfare_resource", "length",
    )


class _EpisodeCollector:
    def __init__(self, sim: SimConfig, series: "StepSeries"):
        self.sim = sim
        self.series = series
        self.per_step: list[tuple[float, ...]] = []

    def record_step(self, state) -> None:
        alive = [a for a in state.agents if a.alive]
        if not alive:
            return
        wb = [wellbeing(a, self.sim) for a in alive]
        eaten = [float(a.berries_eaten) for a in alive]
        row = (
            metrics.gini(wb), metrics.min_experience(wb), metrics.social_welfare(wb),
            metrics.gini(eaten), metrics.min_experience(eaten), metrics.social_welfare(eaten),
        )
        self.per_step.append(row)
        self.series.add(state.step - 1, row)

    def finish(self, state) -> EpisodeMetrics:
        if self.per_step:
            means = np.asarray(self.per_step).mean(axis=0)
        else:
            means = np.zeros(6)
        return EpisodeMetrics(*(float(v) for v in means), length=state.step)


class StepSeries:
    """Per-step sums over evaluation episodes, for the day-series CSVs."""

    def __init__(self, t_max: int):
        self.sums = np.zeros((t_max, 6))
        self.alive_episodes = np.zeros(t_max, dtype=np.int64)

    def add(self, step_index: int, row) -> None:
        self.sums[step_index] += row
        self.alive_episodes[step_index] += 1

    def merge(self, other: "StepSeries") -> None:
        self.sums += other.sums
        self.alive_episodes += other.alive_episodes

    def normalised(self, column: int) -> np.ndarray:
        """Per-step mean over the episodes still alive at that step."""
        counts = np.maximum(self.alive_episodes, 1)
        return self.sums[:, column] / counts


@dataclass
class SocietyResult:
    society: str
    records: list[EpisodeMetrics] = field(default_factory=list)
    series: StepSeries | None = None
    norms: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def merge(self, other: "SocietyResult") -> None:
        self.records.extend(other.records)
        self.series.merge(other.series)
        for key, stats in other.norms.items():
            mine = self.norms.setdefault(key, {"num": 0, "fitness": 0.0})
            mine["num"] += stats["num"]
            mine["fitness"] += stats["fitness"]


def run_society(cfg: ExperimentConfig, society: str, seed_index: int,
                verbose: bool = False) -> SocietyResult:
    """Train then evaluate one society for one seed replicate."""
    sim = cfg.sim_config(society)
    feat = n_features(sim)
    thresholds = ViewThresholds.from_sim(sim)

    learners = [
        DQNLearner(feat, N_ACTIONS, cfg.learner,
                   np.random.default_rng([cfg.seed, seed_index, _AGENT_STREAM, i]))
        for i in range(sim.n_agents)
    ]
    bases = [BehaviourBase(cfg.norms) for _ in range(sim.n_agents)]
    agents = [
        HarvestAgent(i, learners[i], bases[i], sim, cfg.ethics, thresholds)
        for i in range(sim.n_agents)
    ]
    norm_base = NormBase(cfg.norms, sim.n_agents)
    result = SocietyResult(society=society, series=StepSeries(sim.t_max))

    total = cfg.train_episodes + cfg.eval_episodes
    for episode in range(total):
        training = episode < cfg.train_episodes
        eps = (epsilon_schedule(episode, cfg.train_episodes,
                                cfg.learner.epsilon_start, cfg.learner.epsilon_final)
               if training else 0.0)
        sanctions_on = society == RAWLE and (training or cfg.ethics.sanction_during_eval)
        for agent in agents:
            agent.learner.epsilon = eps
            agent.apply_sanctions = sanctions_on

        env_rng = np.random.default_rng([cfg.seed, seed_index, _ENV_STREAM, episode])
        state = init_episode(sim, env_rng)
        collector = None if training else _EpisodeCollector(sim, result.series)

        done = False
        while not done:
            done = run_step(state, agents, sim)
            step = state.step
            for base in bases:
                base.age_all()
                base.clip(step)
            norm_base.update_emerged(bases)
            norm_base.clip(bases, step)
            for key, stats in norm_base.norms.items():
                result.norms[key] = dict(stats)
            if collector is not None:
                collector.record_step(state)
        if collector is not None:
            result.records.append(collector.finish(state))
        if verbose and (episode + 1) % 100 == 0:
            print(f"  {society} seed {seed_index}: episode {episode + 1}/{total}",
                  file=sys.stderr)
    return result


def run_societies(cfg: ExperimentConfig, verbose: bool = False) -> dict[str, SocietyResult]:
    results: dict[str, SocietyResult] = {}
    # The per-step matmuls are tiny; multi-threaded BLAS only adds sync cost
    # and machine-dependent scheduling, so pin it to one thread here.
    with threadpool_limits(limits=1, user_api="blas"):
        for society in cfg.societies():
            merged: SocietyResult | None = None
            for seed_index in range(cfg.n_seeds):
                if verbose:
                    print(f"running {society}, seed replicate {seed_index}", file=sys.stderr)
                one = run_society(cfg, society, seed_index, verbose=verbose)
                if merged is None:
                    merged = one
                else:
                    merged.merge(one)
            results[society] = merged
    return results


# ---------------------------------------------------------------------------
# Statistics report
# ---------------------------------------------------------------------------

# (report metric name, variable name, EpisodeMetrics field)
STAT_ROWS = (
    ("inequality", "wellbeing", "gini_wellbeing"),
    ("inequality", "resource", "gini_resource"),
    ("min_experience", "wellbeing", "min_wellbeing"),
    ("min_experience", "resource", "min_resource"),
    ("social_welfare", "wellbeing", "welfare_wellbeing"),
    ("social_welfare", "resource", "welfare_resource"),
    ("robustness", "episode_length", "length"),
)


@dataclass(frozen=True)
class StatsRow:
    metric: str
    variable: str
    baseline_mean: float
    baseline_std: float
    rawle_mean: float
    rawle_std: float
    u_statistic: float
    p_value: float
    cohens_d: float
    magnitude: str


def compute_stats(baseline: SocietyResult, rawle: SocietyResult) -> list[StatsRow]:
    rows = []
    for metric_name, variable, fieldname in STAT_ROWS:
        a = baseline.column(fieldname)
        b = rawle.column(fieldname)
        u, p = metrics.mann_whitney_u(a, b)
        d, label = metrics.cohens_d(a, b)
        rows.append(StatsRow(
            metric=metric_name, variable=variable,
            baseline_mean=float(a.mean()), baseline_std=float(a.std(ddof=1)),
            rawle_mean=float(b.mean()), rawle_std=float(b.std(ddof=1)),
            u_statistic=u, p_value=p, cohens_d=d, magnitude=label,
        ))
    return rows


# ---------------------------------------------------------------------------
# Artifact files
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    return repr(float(value))


def _write_lines(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n")


def _episode_columns_csv(path: Path, results: dict[str, SocietyResult], fieldname: str) -> None:
    societies = list(results)
    header = ",".join(SOCIETY_COLUMN[s] for s in societies)
    columns = [results[s].column(fieldname) for s in societies]
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    _write_lines(path, lines)


def _day_series_csv(path: Path, results: dict[str, SocietyResult], column: int) -> None:
    societies = list(results)
    header = "day," + ",".join(SOCIETY_COLUMN[s] for s in societies)
    lines = [header]
    t_max = results[societies[0]].series.sums.shape[0]
    series = [results[s].series.normalised(column) for s in societies]
    for day in range(t_max):
        lines.append(",".join([str(day + 1)] + [_fmt(s[day]) for s in series]))
    _write_lines(path, lines)


def write_stats_csv(path: Path, rows: list[StatsRow]) -> None:
    lines = ["metric,variable,baseline_mean,baseline_std,rawle_mean,rawle_std,"
             "mann_whitney_u,p_value,cohens_d,magnitude"]
    for r in rows:
        lines.append(",".join([
            r.metric, r.variable,
            _fmt(r.baseline_mean), _fmt(r.baseline_std),
            _fmt(r.rawle_mean), _fmt(r.rawle_std),
            _fmt(r.u_statistic), _fmt(r.p_value), _fmt(r.cohens_d), r.magnitude,
        ]))
    _write_lines(path, lines)


def write_norm_dump(path: Path, norms: dict) -> None:
    """Rule lines, then the generalised tree under a comment header."""
    lines = format_norm_lines(norms)
    tree = format_rule_tree(generalise(norms.keys()))
    body = lines + ["", TREE_HEADER] + (tree.split("\n") if tree else [])
    _write_lines(path, body)


def load_norm_dump(path: Path) -> dict:
    norms = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            break
        view, act, num, fit = parse_rule(line)
        norms[(view, act)] = {"num": num, "fitness": fit}
    return norms


def write_episode_metrics(path: Path, result: SocietyResult) -> None:
    lines = ["episode," + ",".join(EpisodeMetrics.FIELDS)]
    for i, record in enumerate(result.records):
        values = [str(i)]
        for name in EpisodeMetrics.FIELDS:
            value = getattr(record, name)
            values.append(str(value) if name == "length" else _fmt(value))
        lines.append(",".join(values))
    _write_lines(path, lines)


def load_episode_metrics(path: Path) -> SocietyResult:
    lines = Path(path).read_text().splitlines()
    records = []
    for line in lines[1:]:
        parts = line.split(",")[1:]
        records.append(EpisodeMetrics(
            *(float(v) for v in parts[:6]), length=int(parts[6])))
    society = BASELINE if path.name.endswith("baseline.csv") else RAWLE
    return SocietyResult(society=society, records=records)


def _manifest_lines(cfg: ExperimentConfig) -> list[str]:
    lines = [
        f"scenario = {cfg.scenario}",
        f"society = {cfg.society}",
        f"train_episodes = {cfg.train_episodes}",
        f"eval_episodes = {cfg.eval_episodes}",
        f"n_seeds = {cfg.n_seeds}",
        f"seed = {cfg.seed}",
    ]
    sim = cfg.sim_config(cfg.societies()[0])
    for name in ("grid_width", "grid_height", "n_agents", "b_initial", "h_initial",
                 "h_gain", "h_decay", "h_throw", "t_max"):
        lines.append(f"{name} = {getattr(sim, name)}")
    if cfg.scenario == "allotment":
        lines.append("allotment_profile = " + ",".join(str(c) for c in sim.allotment_profile))
    for name in ("batch_size", "target_sync_period", "epsilon_start", "epsilon_final",
                 "learning_rate", "discount", "replay_capacity", "hidden_units",
                 "huber_delta", "optimizer"):
        lines.append(f"{name} = {getattr(cfg.learner, name)}")
    for name in ("penalise_worsened_min", "penalise_missed_improvement", "sanction_during_eval"):
        lines.append(f"{name} = {str(getattr(cfg.ethics, name)).lower()}")
    lines.append(f"norm_decay_rate = {cfg.norms.decay_rate}")
    for name in ("max_behaviours", "clip_behaviours_every", "clip_norms_every",
                 "convergence_threshold"):
        lines.append(f"{name} = {getattr(cfg.norms, name)}")
    return lines


def write_artifacts(cfg: ExperimentConfig, results: dict[str, SocietyResult],
                    out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, writer, *args) -> None:
        path = out_dir / name
        writer(path, *args)
        written.append(path)

    emit("run_manifest.txt", _write_lines, _manifest_lines(cfg))
    emit("gini_days_left_to_live.csv", _episode_columns_csv, results, "gini_wellbeing")
    emit("gini_berries_consumed.csv", _episode_columns_csv, results, "gini_resource")
    emit("total_days_left_to_live.csv", _episode_columns_csv, results, "welfare_wellbeing")
    emit("total_berries_consumed.csv", _episode_columns_csv, results, "welfare_resource")
    emit("min_days_left_to_live.csv", _day_series_csv, results, 1)
    emit("min_berries_consumed.csv", _day_series_csv, results, 4)
    for society, result in results.items():
        column = SOCIETY_COLUMN[society]
        emit(f"processed_episode_df_{column}.csv", _write_lines,
             ["day"] + [str(r.length) for r in result.records])
        emit(f"episode_metrics_{column}.csv", write_episode_metrics, result)
        emit(f"norms_{column}.txt", write_norm_dump, result.norms)
    if len(results) == 2:
        rows = compute_stats(results[BASELINE], results[RAWLE])
        emit("stats_report.csv", write_stats_csv, rows)
    return written


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path,
                   verbose: bool = False) -> dict[str, SocietyResult]:
    """Full pipeline: train, evaluate, and write every artifact. Returns results."""
    results = run_societies(cfg, verbose=verbose)
    write_artifacts(cfg, results, Path(out_dir))
    return results
