"""Flat run configuration: `section.key = value` lines, typed against the
module defaults.

Every key is optional and falls back to the documented default; a key that
is not in the schema is a hard error so typos cannot silently revert a run
to defaults.  The effective configuration can be echoed back out in a form
the parser accepts again.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .dataset import WorldConfig
from .dwa import desk_params
from .embodiment import EmbodimentSpec
from .eval.suite import SuiteConfig
from .flow.train import ExpertTrainConfig
from .rl.env import EnvConfig
from .rl.ppo import PpoConfig
from .rl.train import CurriculumSchedule


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _tuple_parser(elem):
    def parse(s: str):
        parts = [p for p in s.replace(",", " ").split() if p]
        return tuple(elem(p) for p in parts)

    return parse


def _optional(parser):
    """Override slots: 'none' keeps the base (preset) value."""

    def parse(s: str):
        if s.strip().lower() in ("none", "preset"):
            return None
        return parser(s)

    return parse


def _parser_for(default):
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if isinstance(default, str):
        return lambda s: s.strip()
    if isinstance(default, tuple):
        elem = float if any(isinstance(v, float) for v in default) else int
        return _tuple_parser(elem)
    raise TypeError(f"no parser for default {default!r}")


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    return str(value)


def _from_dataclass(obj, skip=()):
    out = {}
    for f in dataclasses.fields(obj):
        if f.name in skip:
            continue
        default = getattr(obj, f.name)
        out[f.name] = (default, _parser_for(default))
    return out


def _build_schema():
    schema = {"seed": (0, int)}

    def add(section, entries):
        for key, (default, parser) in entries.items():
            schema[f"{section}.{key}"] = (default, parser)

    world = _from_dataclass(WorldConfig())
    world["n_worlds"] = (50, int)
    world["target_samples"] = (20000, int)  # 0 means no cap
    add("world", world)

    add("dwa", _from_dataclass(desk_params()))

    add("expert", _from_dataclass(ExpertTrainConfig(), skip=("seed",)))

    # embodiment: a preset name plus per-field overrides applied on top
    emb = {"preset": ("standard", lambda s: s.strip())}
    for f in dataclasses.fields(EmbodimentSpec):
        if f.name == "name":
            continue
        parser = (_tuple_parser(float) if f.name == "v_limits"
                  else int if f.name == "delay_steps" else float)
        emb[f.name] = (None, _optional(parser))
    add("embodiment", emb)

    rl = _from_dataclass(EnvConfig(), skip=("seed",))
    rl.update(_from_dataclass(PpoConfig()))
    rl.update(_from_dataclass(CurriculumSchedule()))
    rl["n_updates"] = (300, int)
    rl["embed_dim"] = (256, int)
    rl["hidden"] = (256, int)
    add("rl", rl)

    ev = _from_dataclass(SuiteConfig(), skip=("seed",))
    ev["fast"] = (False, _parse_bool)
    ev["chunk_size"] = (100, int)
    ev["variants"] = (("full", "pure-rl", "static-0.5", "regr-rl",
                       "ge-only-flow", "ge-only-regr"),
                      _tuple_parser(lambda s: s))
    add("eval", ev)
    return schema


SCHEMA = _build_schema()
SECTIONS = ("world", "dwa", "expert", "embodiment", "rl", "eval")


class RunConfig:
    """Typed flat key-value store seeded from SCHEMA defaults."""

    def __init__(self):
        self.values = {k: default for k, (default, _) in SCHEMA.items()}

    def __getitem__(self, dotted: str):
        return self.values[dotted]

    def set(self, dotted: str, raw: str, where: str = "") -> None:
        if dotted not in SCHEMA:
            raise ConfigError(f"{where}unknown config key {dotted!r}")
        _, parser = SCHEMA[dotted]
        try:
            self.values[dotted] = parser(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where}bad value for {dotted}: {exc}") from exc

    def section(self, name: str) -> dict:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items()
                if k.startswith(prefix)}

    @classmethod
    def from_file(cls, path=None) -> "RunConfig":
        cfg = cls()
        if path is None:
            return cfg
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            key, eq, raw = stripped.partition("=")
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                                  f"got {stripped!r}")
            cfg.set(key.strip(), raw.strip(), where=f"{path}:{lineno}: ")
        return cfg

    def echo(self) -> str:
        lines = ["# effective configuration"]
        for key in SCHEMA:
            lines.append(f"{key} = {_render(self.values[key])}")
        return "\n".join(lines) + "\n"

    # ------------------------------------------------- typed section views

    def world_config(self) -> WorldConfig:
        sec = self.section("world")
        fields = {f.name: sec[f.name] for f in dataclasses.fields(WorldConfig)}
        return WorldConfig(**fields)

    def dwa_params(self):
        return desk_params(**self.section("dwa"))

    def expert_config(self) -> ExpertTrainConfig:
        return ExpertTrainConfig(seed=self.values["seed"],
                                 **self.section("expert"))

    def embodiment_spec(self, name: str | None = None) -> EmbodimentSpec:
        from .embodiment import get_preset, load_embodiment, variant

        sec = self.section("embodiment")
        base = name or sec["preset"]
        try:
            spec = get_preset(base)
        except KeyError:
            if not Path(base).exists():
                raise ConfigError(f"embodiment {base!r}: not a preset name "
                                  "or a spec file")
            spec = load_embodiment(base)
        overrides = {k: v for k, v in sec.items()
                     if k != "preset" and v is not None}
        return variant(spec, **overrides) if overrides else spec

    def env_config(self, seed: int | None = None) -> EnvConfig:
        sec = self.section("rl")
        fields = {f.name: sec[f.name] for f in dataclasses.fields(EnvConfig)
                  if f.name != "seed"}
        return EnvConfig(seed=self.values["seed"] if seed is None else seed,
                         **fields)

    def ppo_config(self) -> PpoConfig:
        sec = self.section("rl")
        return PpoConfig(**{f.name: sec[f.name]
                            for f in dataclasses.fields(PpoConfig)})

    def schedule(self) -> CurriculumSchedule:
        sec = self.section("rl")
        return CurriculumSchedule(
            **{f.name: sec[f.name]
               for f in dataclasses.fields(CurriculumSchedule)})

    def suite_config(self) -> SuiteConfig:
        sec = self.section("eval")
        fields = {f.name: sec[f.name] for f in dataclasses.fields(SuiteConfig)
                  if f.name != "seed"}
        if sec["fast"]:
            fields["n_pairs"] = min(fields["n_pairs"], 25)
        return SuiteConfig(seed=self.values["seed"], **fields)
