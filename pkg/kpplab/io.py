"""Scenario files and result writers

A scenario is a flat sectioned YAML file:

    scenario:                 # name, kind, seed
      name: logistic-constant
      kind: speed
    forcing:                  # kind and the parameters of the family
      kind: constant
      r0: 1.0
    reaction:                 # shape, m0_tilde, M0_tilde, M0, coefficients
      shape: linear
    run:                      # numerical parameters, see RUN_DEFAULTS
      duration: 150
    output:                   # dir, plot
      dir: results

Every section is a mapping of scalars or lists of scalars. Unknown sections and keys are
reported with their line and the closest known name.
"""
import difflib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Literal, Optional, Sequence, Union, get_args

import numpy as np
import pandas as pd
import yaml

from .forcing import DEFAULT_HORIZON, DEFAULT_WINDOWS, FORCING_KIND, Forcing
from .reaction import SHAPE_KIND, Reaction

logger = logging.getLogger(__name__)

SCENARIO_KIND = Literal[
    'bounds', 'averages', 'speed', 'hairtrigger', 'front', 'critical', 'bracket', 'stability', 'verify'
]
SECTIONS = ('scenario', 'forcing', 'reaction', 'run', 'output')
SCENARIO_KEYS = ('name', 'kind', 'seed')
FORCING_KEYS: dict[str, tuple[str, ...]] = {
    'constant': ('r0',),
    'periodic': ('r0', 'amplitude', 'period', 'phase'),
    'quasiperiodic': ('r0', 'amplitudes', 'frequencies'),
    'switching': ('levels', 'dwell', 'seed'),
}
REACTION_KEYS = ('shape', 'm0_tilde', 'M0_tilde', 'M0', 'coefficients')
OUTPUT_KEYS = ('dir', 'plot')

# `None` means the default of the experiment function the scenario kind runs
RUN_DEFAULTS: dict[str, object] = {
    'dt': 0.01,
    'window': 600,
    'duration': None,
    'horizon': DEFAULT_HORIZON,
    'windows': list(DEFAULT_WINDOWS),
    'level_fraction': 0.5,
    'start_time': 0.,
    'start_times': [0.],
    'margin': 50.,
    'datum_width': 1,
    'datum_height': None,
    'gamma': None,
    'gammas': None,
    'mu': None,
    'subcells': 16,
    'tau_ladder': [5., 10., 20., 40., 80.],
    'tol': None,
    'output_times': [0.],
    'frame_resampling': 'spline',
    'pulsating': False,
    'n_members': 8,
    'n_trials': 100,
}
OUTPUT_DEFAULTS = {'dir': 'results', 'plot': True}

CSV_FLOAT_FORMAT = '%.17g'
SVG_HASHSALT = 'kpplab'


@dataclass(frozen=True)
class ScenarioIssue:
    line: Optional[int]
    key: str
    reason: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line is not None else 'file'
        return f"{where}, `{self.key}`: {self.reason}"


@dataclass
class ScenarioParseError(ValueError):
    issues: list[ScenarioIssue]
    source: str = '<string>'

    def __str__(self) -> str:
        return f"Cannot parse the scenario {self.source}:\n" + '\n'.join(f"* {issue}" for issue in self.issues)


@dataclass
class ScenarioValidationError(ValueError):
    key: str
    reason: str

    def __str__(self) -> str:
        return f"{self.key} {self.reason}"


@dataclass(frozen=True)
class RunConfig:
    """Numerical parameters of a scenario. Defaults are listed in RUN_DEFAULTS"""
    dt: float = 0.01
    window: int = 600
    duration: Optional[float] = None
    horizon: float = DEFAULT_HORIZON
    windows: tuple[float, ...] = DEFAULT_WINDOWS
    level_fraction: float = 0.5
    start_time: float = 0.
    start_times: tuple[float, ...] = (0.,)
    margin: float = 50.
    datum_width: int = 1
    datum_height: Optional[float] = None
    gamma: Optional[float] = None
    gammas: Optional[tuple[float, ...]] = None
    mu: Optional[float] = None
    subcells: int = 16
    tau_ladder: tuple[float, ...] = (5., 10., 20., 40., 80.)
    tol: Optional[float] = None
    output_times: tuple[float, ...] = (0.,)
    frame_resampling: Literal['spline', 'round'] = 'spline'
    pulsating: bool = False
    n_members: int = 8
    n_trials: int = 100


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: SCENARIO_KIND
    forcing: Forcing
    reaction: Reaction
    run: RunConfig = field(default_factory=RunConfig)
    seed: int = 0
    out_dir: str = 'results'
    plot: bool = True

    def describe(self) -> dict[str, object]:
        """Flat key/value description used in reports"""
        desc = {'scenario_name': self.name, 'scenario_kind': self.kind, 'scenario_seed': self.seed}
        desc |= {f"run_{k}": ';'.join(map(str, v)) if isinstance(v, tuple) else v for k, v in asdict(self.run).items()}
        return desc | self.reaction.describe()


####################
# Scenario parsing #
####################
def _suggest(key: str, allowed: Sequence[str]) -> str:
    close = difflib.get_close_matches(key, allowed, n=1)
    hint = f"; did you mean `{close[0]}`?" if close else ''
    return f"unknown name{hint} Known names are: {', '.join(allowed)}"


def _flat_sections(root: yaml.Node, issues: list[ScenarioIssue]) -> dict[str, dict[str, tuple[object, int]]]:
    """Sections of the composed document as {section: {key: (value, line)}}"""
    if not isinstance(root, yaml.MappingNode):
        issues.append(ScenarioIssue(root.start_mark.line + 1 if root else None, '<root>', 'should be a mapping of sections'))
        return {}

    sections = {}
    for key_node, section_node in root.value:
        section, line = key_node.value, key_node.start_mark.line + 1
        if section not in SECTIONS:
            issues.append(ScenarioIssue(line, section, _suggest(section, SECTIONS)))
            continue
        if not isinstance(section_node, yaml.MappingNode):
            issues.append(ScenarioIssue(line, section, 'section should be a mapping of keys'))
            continue

        entries = {}
        for k_node, v_node in section_node.value:
            k_line = k_node.start_mark.line + 1
            if isinstance(v_node, yaml.MappingNode) or \
                    (isinstance(v_node, yaml.SequenceNode) and any(not isinstance(n, yaml.ScalarNode) for n in v_node.value)):
                issues.append(ScenarioIssue(k_line, f"{section}.{k_node.value}", 'nested structures are not allowed'))
                continue
            value = yaml.safe_load(yaml.serialize(v_node))
            entries[k_node.value] = (value, k_line)
        sections[section] = entries
    return sections


def _check_keys(section: str, entries: dict[str, tuple[object, int]], allowed: Sequence[str],
                issues: list[ScenarioIssue]):
    for key, (_, line) in entries.items():
        if key not in allowed:
            issues.append(ScenarioIssue(line, f"{section}.{key}", _suggest(key, allowed)))


def _check_name(section: str, key: str, entries: dict[str, tuple[object, int]], allowed: Sequence[str],
                issues: list[ScenarioIssue]) -> bool:
    if key not in entries:
        issues.append(ScenarioIssue(None, f"{section}.{key}", 'is required'))
        return False
    value, line = entries[key]
    if value not in allowed:
        issues.append(ScenarioIssue(line, f"{section}.{key}", f"`{value}` is an " + _suggest(str(value), allowed)))
        return False
    return True


def _require_positive(key: str, value: Optional[float], strict: bool = True):
    if value is None:
        return
    if not np.all(np.isfinite(value)) or (np.any(np.asarray(value) <= 0) if strict else np.any(np.asarray(value) < 0)):
        raise ScenarioValidationError(key, 'must be positive' if strict else 'must be non-negative')


def _number(key: str, value: object) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(key, f"must be a number, got {value!r}")
    return float(value)


def _numbers(key: str, value: object) -> tuple[float, ...]:
    values = value if isinstance(value, list) else [value]
    return tuple(_number(key, v) for v in values)


def _build_forcing(values: dict[str, object], seed: int) -> Forcing:
    kind = values['kind']
    missing = [k for k in FORCING_KEYS[kind] if k not in values and k not in {'phase', 'seed'}]
    if missing:
        raise ScenarioValidationError(f"forcing.{missing[0]}", f"is required for the {kind} forcing")
    if kind == 'constant':
        return Forcing.constant(_number('forcing.r0', values['r0']))
    if kind == 'periodic':
        period = _number('forcing.period', values['period'])
        _require_positive('forcing.period', period)
        return Forcing.periodic(_number('forcing.r0', values['r0']), _number('forcing.amplitude', values['amplitude']),
                                period, _number('forcing.phase', values.get('phase', 0.)))
    if kind == 'quasiperiodic':
        amplitudes = _numbers('forcing.amplitudes', values['amplitudes'])
        frequencies = _numbers('forcing.frequencies', values['frequencies'])
        if len(amplitudes) != len(frequencies):
            raise ScenarioValidationError('forcing.frequencies', 'must have as many entries as forcing.amplitudes')
        _require_positive('forcing.frequencies', frequencies)
        return Forcing.quasiperiodic(_number('forcing.r0', values['r0']), list(zip(amplitudes, frequencies)))

    dwell = _number('forcing.dwell', values['dwell'])
    _require_positive('forcing.dwell', dwell)
    return Forcing.switching(_numbers('forcing.levels', values['levels']), dwell, int(values.get('seed', seed)))


def _build_reaction(values: dict[str, object], forcing: Forcing) -> Reaction:
    shape = values.get('shape', 'linear')
    m0 = _number('reaction.m0_tilde', values.get('m0_tilde', 1.))
    M0_tilde = _number('reaction.M0_tilde', values.get('M0_tilde', m0))
    _require_positive('reaction.m0_tilde', m0)
    if M0_tilde < m0:
        raise ScenarioValidationError('reaction.M0_tilde', 'must not be below reaction.m0_tilde')
    if shape == 'linear' and M0_tilde != m0:
        raise ScenarioValidationError('reaction.M0_tilde', 'must equal reaction.m0_tilde for the linear shape')
    M0 = values.get('M0')
    M0 = None if M0 is None else _number('reaction.M0', M0)
    _require_positive('reaction.M0', M0)
    coefficients = _numbers('reaction.coefficients', values['coefficients']) if 'coefficients' in values else ()
    if shape == 'polynomial' and not coefficients:
        raise ScenarioValidationError('reaction.coefficients', 'are required for the polynomial shape')
    if forcing.value_range()[1] <= 0 and M0 is None:
        raise ScenarioValidationError('forcing', 'must take positive values somewhere to define the saturation level')
    return Reaction(forcing, shape, m0, M0_tilde, M0, coefficients)


def _build_run(values: dict[str, object]) -> RunConfig:
    merged = {**RUN_DEFAULTS, **values}
    kwargs = {}
    for fld in fields(RunConfig):
        value, key = merged[fld.name], f"run.{fld.name}"
        if value is None or fld.name in {'frame_resampling', 'pulsating'}:
            kwargs[fld.name] = value
        elif isinstance(RUN_DEFAULTS[fld.name], list) or fld.name == 'gammas':
            kwargs[fld.name] = _numbers(key, value)
        elif fld.name in {'window', 'datum_width', 'subcells', 'n_members', 'n_trials'}:
            number = _number(key, value)
            if number != int(number):
                raise ScenarioValidationError(key, 'must be an integer')
            kwargs[fld.name] = int(number)
        else:
            kwargs[fld.name] = _number(key, value)
    run = RunConfig(**kwargs)

    for key in ('dt', 'duration', 'horizon', 'windows', 'margin', 'datum_width', 'datum_height', 'gamma', 'gammas',
                'mu', 'tau_ladder', 'tol', 'n_members', 'n_trials'):
        _require_positive(key, getattr(run, key))
    _require_positive('output_times', run.output_times, strict=False)
    _require_positive('start_times', run.start_times, strict=False)
    if run.window < 10:
        raise ScenarioValidationError('window', 'must be at least 10')
    if run.subcells < 8:
        raise ScenarioValidationError('subcells', 'must be at least 8')
    if not 0 < run.level_fraction < 1:
        raise ScenarioValidationError('level_fraction', 'must lie in (0, 1)')
    if list(run.tau_ladder) != sorted(run.tau_ladder):
        raise ScenarioValidationError('tau_ladder', 'must be increasing')
    if run.frame_resampling not in ('spline', 'round'):
        raise ScenarioValidationError('frame_resampling', "must be 'spline' or 'round'")
    if not isinstance(run.pulsating, bool):
        raise ScenarioValidationError('pulsating', 'must be true or false')
    return run


def parse_scenario(text: str, source: str = '<string>') -> Scenario:
    """Parse and validate the scenario `text`

    Raises
    ------
    ScenarioParseError
        With every located issue: malformed YAML, unknown section or key (with a suggestion),
        nested structures, missing or unknown kinds
    ScenarioValidationError
        For the first value breaking its invariant, e.g. "dt must be positive"
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as err:
        mark = getattr(err, 'problem_mark', None)
        raise ScenarioParseError([ScenarioIssue(mark.line + 1 if mark else None, '<yaml>', str(err))], source)
    if root is None:
        raise ScenarioParseError([ScenarioIssue(None, '<root>', 'scenario is empty')], source)

    issues: list[ScenarioIssue] = []
    sections = _flat_sections(root, issues)
    for section in ('scenario', 'forcing'):
        if section not in sections and not any(i.key == section for i in issues):
            issues.append(ScenarioIssue(None, section, 'section is required'))
    scenario_entries = sections.get('scenario', {})
    forcing_entries = sections.get('forcing', {})

    _check_keys('scenario', scenario_entries, SCENARIO_KEYS, issues)
    if 'scenario' in sections:
        _check_name('scenario', 'kind', scenario_entries, get_args(SCENARIO_KIND), issues)
    if 'forcing' in sections and _check_name('forcing', 'kind', forcing_entries, get_args(FORCING_KIND), issues):
        _check_keys('forcing', forcing_entries, ('kind',) + FORCING_KEYS[forcing_entries['kind'][0]], issues)
    reaction_entries = sections.get('reaction', {})
    _check_keys('reaction', reaction_entries, REACTION_KEYS, issues)
    if 'shape' in reaction_entries:
        _check_name('reaction', 'shape', reaction_entries, get_args(SHAPE_KIND), issues)
    _check_keys('run', sections.get('run', {}), tuple(RUN_DEFAULTS), issues)
    _check_keys('output', sections.get('output', {}), OUTPUT_KEYS, issues)
    if issues:
        raise ScenarioParseError(sorted(issues, key=lambda i: (i.line is None, i.line or 0)), source)

    def plain(section: str) -> dict[str, object]:
        return {k: v for k, (v, _) in sections.get(section, {}).items()}

    meta, output = plain('scenario'), {**OUTPUT_DEFAULTS, **plain('output')}
    seed = meta.get('seed', 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioValidationError('seed', 'must be a non-negative integer')
    forcing = _build_forcing(plain('forcing'), seed)
    reaction = _build_reaction(plain('reaction'), forcing)
    run = _build_run(plain('run'))
    name = str(meta.get('name', Path(source).stem if source != '<string>' else meta['kind']))
    scenario = Scenario(name, meta['kind'], forcing, reaction, run, seed, str(output['dir']), bool(output['plot']))
    logger.debug('Parsed scenario %s: %s', name, scenario)
    return scenario


def read_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate the scenario file at `path`"""
    path = Path(path)
    return parse_scenario(path.read_text(encoding='utf-8'), str(path))


###########
# Writers #
###########
def _builtin(value: object) -> object:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    if isinstance(value, (tuple, list, np.ndarray)):
        return ';'.join(map(str, value))
    return value


def write_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write `df` with a header row, '.' decimals and round-trip float precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    return path


def write_report(report: dict[str, object], path: Union[str, Path]) -> Path:
    """Write a flat key/value report as JSON with sorted keys"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flat = {str(k): _builtin(v) for k, v in report.items()}
    path.write_text(json.dumps(flat, sort_keys=True, indent=2) + '\n', encoding='utf-8')
    return path


def write_svg(df: pd.DataFrame, x: str, ys: Sequence[str], path: Union[str, Path], title: str = '',
              xlabel: Optional[str] = None, ylabel: str = '') -> Path:
    """Line plot of the columns `ys` against `x`, written as a deterministic SVG file"""
    import matplotlib
    from matplotlib.figure import Figure

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({'svg.hashsalt': SVG_HASHSALT, 'svg.fonttype': 'none'}):
        fig = Figure(figsize=(6, 4))
        ax = fig.add_subplot()
        for y in ys:
            ax.plot(df[x], df[y], label=y, linewidth=1)
        ax.set_xlabel(xlabel or x)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(ys) > 1:
            ax.legend()
        fig.savefig(path, format='svg', metadata={'Date': None})
    return path
