"""INI parsing for task files and experiment specs.

A task file mirrors the tuning-setting listing users write by hand::

    [Tuning-Setting]
    components = {'index': 'DBA-Bandit', 'knob': 'OtterTune', 'query': 'LearnedRewrite'}
    tuning_budget = 108000
    performance_metric = 'execution-time'

Optional sections: ``[Allocator]`` (strategy, UCB constants), ``[System]``
(a preset name and/or simulator parameters) and ``[Agent:<component>]``
(agent hyperparameters). Unknown sections and keys are errors.
"""
from __future__ import annotations

import ast
import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..agents import resolve_kind
from ..core import ComponentId, TuningTask
from ..target_sim import COMPONENT_NAMES, SystemParams
from .scenarios import K_EVALS, SCENARIOS, get_scenario

MINIMIZED_METRICS = ("execution-time", "latency")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^([^\s=:#;][^=:]*?)\s*[=:]")


class ConfigError(ValueError):
    """Malformed task or experiment file; message carries the file and line."""


class _Source:
    """configparser wrapper that remembers where every section and key was written."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read file: {exc.strerror or exc}") from None
        self.parser = configparser.ConfigParser(interpolation=None, strict=True)
        self.parser.optionxform = str.lower
        try:
            self.parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        self.lines: dict[tuple[str, str | None], int] = {}
        section = None
        for no, line in enumerate(text.splitlines(), 1):
            m = _SECTION_RE.match(line)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
                continue
            m = _KEY_RE.match(line)
            if section is not None and m:
                self.lines.setdefault((section, m.group(1).strip().lower()), no)

    def error(self, msg, section=None, key=None):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        where = f"{self.path}:{line}" if line else str(self.path)
        return ConfigError(f"{where}: {msg}")

    def sections(self):
        return self.parser.sections()

    def items(self, section):
        return dict(self.parser.items(section)) if self.parser.has_section(section) else {}

    def check_keys(self, section, allowed):
        for key in self.items(section):
            if key not in allowed:
                raise self.error(f"unknown key {key!r} in [{section}]; allowed: {sorted(allowed)}", section, key)

    def literal(self, section, key, value):
        try:
            return ast.literal_eval(value)
        except (ValueError, SyntaxError):
            raise self.error(f"{key} = {value!r} is not a literal", section, key) from None

    def number(self, section, key, value, cast=float):
        v = self.literal(section, key, value)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(f"{key} must be a number, got {value!r}", section, key)
        if cast is int:
            if float(v) != int(v):
                raise self.error(f"{key} must be an integer, got {value!r}", section, key)
            return int(v)
        return float(v)

    def string(self, value):
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        return value


@dataclass(frozen=True)
class TaskConfig:
    """A parsed task file: the task plus everything needed to run it on the simulator."""

    task: TuningTask
    system: SystemParams
    strategy: str = "ts_buffer"
    agent_hyper: dict = field(default_factory=dict)
    allocator_options: dict = field(default_factory=dict)
    scenario: str | None = None


TASK_KEYS = {"components", "tuning_budget", "performance_metric", "sub_budget", "k_evals", "buffer_size",
             "bootstrap_rounds", "rfactor", "seed"}
ALLOCATOR_KEYS = {"strategy", "ucb_beta", "ucb_lambda"}
SYSTEM_FIELDS = {f.name for f in dataclasses.fields(SystemParams)} - {"order"}


def _system_overrides(src: _Source, section: str) -> dict:
    out = {}
    for key, raw in src.items(section).items():
        if key == "scenario":
            continue
        if key not in SYSTEM_FIELDS:
            raise src.error(f"unknown key {key!r} in [{section}]", section, key)
        val = src.literal(section, key, raw)
        if val is not None and (isinstance(val, bool) or not isinstance(val, (int, float))):
            raise src.error(f"{key} must be numeric", section, key)
        out[key] = val
    return out


def parse_task(path) -> TaskConfig:
    src = _Source(path)
    main = "Tuning-Setting"
    known = {main, "Allocator", "System"}
    for sec in src.sections():
        if sec not in known and not sec.startswith("Agent:"):
            raise src.error(f"unknown section [{sec}]", sec)
    if main not in src.sections():
        raise src.error(f"missing required section [{main}]")
    src.check_keys(main, TASK_KEYS)
    items = src.items(main)
    for req in ("components", "tuning_budget", "performance_metric"):
        if req not in items:
            raise src.error(f"missing required key {req!r} in [{main}]", main)

    comps = src.literal(main, "components", items["components"])
    if not isinstance(comps, dict):
        raise src.error("components must be a mapping of component name to agent", main, "components")
    if not comps:
        raise src.error("components must name at least one component", main, "components")
    names = [str(n).strip().lower() for n in comps]
    if sorted(names) != sorted(COMPONENT_NAMES):
        raise src.error(f"the simulator has components {list(COMPONENT_NAMES)}; got {names}", main, "components")
    try:
        kinds = [resolve_kind(str(v)) for v in comps.values()]
    except ValueError as exc:
        raise src.error(str(exc), main, "components") from None

    metric = src.string(items["performance_metric"])
    if metric not in MINIMIZED_METRICS:
        raise src.error(f"performance_metric must be one of {MINIMIZED_METRICS}, got {metric!r}",
                        main, "performance_metric")

    sys_items = src.items("System")
    scenario = src.string(sys_items["scenario"]) if "scenario" in sys_items else None
    if scenario is not None and scenario not in SCENARIOS:
        raise src.error(f"unknown scenario {scenario!r}; known: {sorted(SCENARIOS)}", "System", "scenario")
    base = get_scenario(scenario).system if scenario else SystemParams()
    try:
        system = base.with_(order=tuple(names), **_system_overrides(src, "System"))
    except (TypeError, ValueError) as exc:
        raise src.error(str(exc), "System") from None

    num = {k: src.number(main, k, items[k], int if k in ("buffer_size", "bootstrap_rounds", "seed", "k_evals")
                         else float)
           for k in TASK_KEYS - {"components", "performance_metric"} if k in items}
    k_evals = num.pop("k_evals", None)
    if "sub_budget" not in num:
        preset = get_scenario(scenario).sub_budget if scenario and k_evals is None else None
        num["sub_budget"] = preset if preset is not None else 2 * system.eval_cost * (k_evals or K_EVALS)
    system = system.with_(seed=num.get("seed", system.seed))
    try:
        task = TuningTask(tuple((ComponentId(i, n), k) for i, (n, k) in enumerate(zip(names, kinds))),
                          performance_metric=metric, **num)
    except ValueError as exc:
        raise src.error(str(exc), main) from None

    src.check_keys("Allocator", ALLOCATOR_KEYS)
    alloc_items = src.items("Allocator")
    strategy = src.string(alloc_items.get("strategy", "ts_buffer"))
    options = {}
    for key, name in (("ucb_beta", "ucb_beta"), ("ucb_lambda", "ucb_lambda")):
        if key in alloc_items:
            options[name] = src.number("Allocator", key, alloc_items[key])

    hyper = {}
    for sec in src.sections():
        if sec.startswith("Agent:"):
            comp = sec.split(":", 1)[1].strip().lower()
            if comp not in names:
                raise src.error(f"[{sec}] names no component of this task", sec)
            hyper[comp] = {k: src.literal(sec, k, v) for k, v in src.items(sec).items()}
    return TaskConfig(task, system, strategy, hyper, options, scenario)


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    strategies: tuple[str, ...]
    seeds: tuple[int, ...]
    sweep: dict = field(default_factory=dict)
    output_dir: str = "runs"
    overrides: dict = field(default_factory=dict)
    system_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if not self.strategies:
            raise ValueError("an experiment needs at least one strategy")
        if not self.seeds:
            raise ValueError("an experiment needs at least one seed")
        for key in self.sweep:
            if key not in SWEEP_KEYS:
                raise ValueError(f"cannot sweep {key!r}; supported: {SWEEP_KEYS}")


SWEEP_KEYS = ("buffer_size", "rfactor")
EXPERIMENT_KEYS = {"scenario", "strategies", "seeds", "output_dir", "tuning_budget", "sub_budget",
                   "bootstrap_rounds"}


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0-4, 10"`` -> (0, 1, 2, 3, 4, 10)."""
    seeds = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        lo, dash, hi = part.partition("-")
        if dash:
            if int(hi) < int(lo):
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate seeds")
    return tuple(seeds)


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip().strip("'\"") for s in re.split(r"[,\s]+", text.strip().strip("[]")) if s.strip())


def parse_experiment(path) -> ExperimentSpec:
    src = _Source(path)
    main = "Experiment"
    for sec in src.sections():
        if sec not in (main, "Sweep", "System"):
            raise src.error(f"unknown section [{sec}]", sec)
    if main not in src.sections():
        raise src.error(f"missing required section [{main}]")
    src.check_keys(main, EXPERIMENT_KEYS)
    items = src.items(main)
    for req in ("scenario", "strategies", "seeds"):
        if req not in items:
            raise src.error(f"missing required key {req!r} in [{main}]", main)
    try:
        seeds = parse_seeds(items["seeds"])
    except ValueError as exc:
        raise src.error(f"seeds: {exc}", main, "seeds") from None
    overrides = {}
    for key in ("tuning_budget", "sub_budget"):
        if key in items:
            overrides[key] = src.number(main, key, items[key])
    if "bootstrap_rounds" in items:
        overrides["bootstrap_rounds"] = src.number(main, "bootstrap_rounds", items["bootstrap_rounds"], int)

    sweep = {}
    for key, raw in src.items("Sweep").items():
        if key not in SWEEP_KEYS:
            raise src.error(f"cannot sweep {key!r}; supported: {list(SWEEP_KEYS)}", "Sweep", key)
        cast = int if key == "buffer_size" else float
        try:
            sweep[key] = tuple(cast(v) for v in _split_list(raw))
        except ValueError:
            raise src.error(f"{key} values must be numbers", "Sweep", key) from None
        if not sweep[key]:
            raise src.error(f"{key} sweep is empty", "Sweep", key)
    if "scenario" in src.items("System"):
        raise src.error("set the scenario in [Experiment]", "System", "scenario")
    try:
        return ExperimentSpec(
            scenario=src.string(items["scenario"]),
            strategies=_split_list(items["strategies"]),
            seeds=seeds,
            sweep=sweep,
            output_dir=src.string(items.get("output_dir", "runs")),
            overrides=overrides,
            system_overrides=_system_overrides(src, "System"),
        )
    except ValueError as exc:
        raise src.error(str(exc), main) from None
