"""
Structured key-value configuration files

Two spellings are accepted and may be mixed:

    [channel]
    sigma_e = 0.35

    channel.sigma_e = 0.35

Section headers may carry attributes (``[point pe=6000 t=15000]``); those are
used by the voltage look-up table.
"""
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from ..exceptions import ConfigError, MissingArtifact
from ..models.campaign import RunConfig
from ..models.quantization import CostWeights
from ..utils.helpers import format_profile

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "FLASHSIM_SEED"


@dataclass(frozen=True)
class KvEntry:
    """One `key = value` line"""
    section: str
    key: str
    value: str
    line: int


@dataclass(frozen=True)
class KvSection:
    """A `[name attr=value ...]` header and the entries below it"""
    name: str
    attributes: Dict[str, str]
    entries: Tuple[KvEntry, ...]
    line: int


def _parse_header(text: str, lineno: int) -> Tuple[str, Dict[str, str]]:
    inner = text.strip()
    if not inner.endswith(']'):
        raise ConfigError("unterminated section header", line=lineno)
    parts = inner[1:-1].split()
    if not parts:
        raise ConfigError("empty section header", line=lineno)
    attributes = {}
    for part in parts[1:]:
        key, sep, value = part.partition('=')
        if not sep or not key:
            raise ConfigError(f"malformed section attribute '{part}'", line=lineno)
        attributes[key] = value
    return parts[0], attributes


def parse_sections(text: str) -> List[KvSection]:
    """Split text into sections; dotted keys outside a header open an implicit section"""
    sections: List[KvSection] = []
    name, attributes, header_line = "", {}, 0
    entries: List[KvEntry] = []

    def flush():
        if name or entries:
            sections.append(KvSection(name, attributes, tuple(entries), header_line))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('['):
            flush()
            name, attributes = _parse_header(line, lineno)
            header_line = lineno
            entries = []
            continue

        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got '{line}'", line=lineno)
        section = name
        if not name:
            section, dot, key = key.partition('.')
            if not dot or not key:
                raise ConfigError(f"key '{section}' is outside any section", line=lineno)
        entries.append(KvEntry(section, key, value.strip(), lineno))

    flush()
    return sections


def parse_kv(text: str) -> List[KvEntry]:
    """Flatten a key-value document into entries"""
    return [entry for section in parse_sections(text) for entry in section.entries]


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, dict):
        return format_profile(value)
    if isinstance(value, CostWeights):
        return f"{value.c1!r},{value.c2!r}"
    if hasattr(value, 'value') and not isinstance(value, (int, str)):
        return str(value.value)
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dump_kv(sections: Iterable[Tuple[str, Dict[str, Any]]]) -> str:
    """Render (header, {key: value}) pairs as `[header]` blocks"""
    blocks = []
    for header, values in sections:
        lines = [f"[{header}]"]
        lines.extend(f"{key} = {_format_value(value)}" for key, value in values.items())
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _block_updates(block_type: type, entries: List[KvEntry]) -> Dict[str, Any]:
    known = {f.name: f for f in fields(block_type)}
    updates = {}
    for entry in entries:
        field_def = known.get(entry.key)
        if field_def is None:
            raise ConfigError(f"unknown key '{entry.section}.{entry.key}'", line=entry.line)
        parse = field_def.metadata.get('parse', float)
        try:
            updates[entry.key] = parse(entry.value)
        except (TypeError, ValueError) as e:
            raise ConfigError(
                f"invalid value '{entry.value}' for '{entry.section}.{entry.key}': {e}", line=entry.line
            ) from e
    return updates


def apply_entries(config: RunConfig, entries: List[KvEntry]) -> RunConfig:
    """Return a copy of config with entries applied; validates every touched block"""
    blocks = RunConfig.block_types()
    grouped: Dict[str, List[KvEntry]] = {}
    for entry in entries:
        if entry.section not in blocks:
            raise ConfigError(f"unknown section '{entry.section}'", line=entry.line)
        grouped.setdefault(entry.section, []).append(entry)

    result = config
    for section, section_entries in grouped.items():
        updates = _block_updates(blocks[section], section_entries)
        try:
            block = replace(getattr(result, section), **updates)
        except ValueError as e:
            raise ConfigError(str(e), line=section_entries[0].line) from e
        result = replace(result, **{section: block})
    return result


def load_run_config(path: Optional[Union[str, Path]] = None, text: Optional[str] = None,
                    env: Optional[Dict[str, str]] = None) -> RunConfig:
    """
    Build a RunConfig from defaults, an optional file and the environment.

    The FLASHSIM_SEED environment variable overrides run.master_seed from the
    file; command-line flags are applied afterwards by the caller.
    """
    config = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        logger.info(f"Loading run configuration from {path}")
    if text:
        config = apply_entries(config, parse_kv(text))

    env = os.environ if env is None else env
    seed = env.get(SEED_ENV_VAR)
    if seed not in (None, ""):
        try:
            config = replace(config, run=replace(config.run, master_seed=int(seed)))
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{seed}'") from e
        logger.debug(f"Master seed {seed} taken from {SEED_ENV_VAR}")
    return config


def override(config: RunConfig, section: str, **values: Any) -> RunConfig:
    """Apply already-typed overrides (command-line flags) to one block"""
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return config
    try:
        block = replace(getattr(config, section), **values)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    return replace(config, **{section: block})


def dump_run_config(config: RunConfig) -> str:
    """Serialize a RunConfig in the same format load_run_config reads"""
    sections = []
    for name in RunConfig.block_types():
        block = getattr(config, name)
        sections.append((name, {f.name: getattr(block, f.name) for f in fields(block)}))
    return dump_kv(sections)


__all__ = [
    'KvEntry',
    'KvSection',
    'SEED_ENV_VAR',
    'parse_sections',
    'parse_kv',
    'dump_kv',
    'apply_entries',
    'load_run_config',
    'override',
    'dump_run_config'
]
