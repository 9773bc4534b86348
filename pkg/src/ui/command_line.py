"""
Command Line Module.

Front end for the analytic engine, the simulator and the validation
harness. `parse_config` turns argv (and an optional key=value config file)
into a `CliConfig`; `execute` runs it and writes CSV/text reports; `main`
maps errors to exit statuses: 0 on success, 1 on domain errors, 2 on usage
errors.

Option values are resolved in this order: command-line flag, config file,
settings.json, built-in defaults.
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

from src.core.errors import RelayRegionError, UsageError
from src.core.model import (CooperationPolicy, RatePoint, SystemParams, validate_params)
from src.core.paths import CONFIG_DIR, get_output_path
from src.core.settings_manager import SettingsManager, normalize_key, parse_key_value_text
from src.services.region_service import RegionSelector, boundary_trace, closure_policy, optimal_pa
from src.services.slotted_simulator import SimConfig, SimMode, run
from src.services.stability_harness import GridAxis, SweepSpec, compare_three_schemes, sweep
from src.ui.report_writer import (SlotTraceWriter, render_boundary_trace, render_region_report,
                                  write_atomic)

logger = logging.getLogger(__name__)

PARAM_KEYS = ("p13", "p12", "p23", "q1", "q2")
DEFAULT_GRID = GridAxis(0.0, 0.2, 20)

COMPARE_FILES = {
    "no_cooperation": "compare_no_cooperation.csv",
    "full_cooperation": "compare_full_cooperation.csv",
    "partial_cooperation": "compare_partial_cooperation.csv",
}


class Command(Enum):
    REGION = "region"
    OPTIMAL_PA = "optimal-pa"
    SIMULATE = "simulate"
    VALIDATE = "validate"
    COMPARE = "compare"


@dataclass(frozen=True)
class CliConfig:
    """
    One fully resolved command.

    Fields a command does not use keep their defaults.
    """
    command: Command
    params: SystemParams
    selector: Optional[RegionSelector] = None
    rates: Optional[RatePoint] = None
    mode: SimMode = SimMode.ORIGINAL
    n_slots: int = 1_000_000
    seeds: Tuple[int, ...] = (1, 2, 3)
    sample_stride: int = 100
    window_count: int = 10
    drift_threshold: float = 1e-4
    exclusion_band: float = 0.01
    resolution: int = 200
    workers: int = 1
    lambda1_grid: GridAxis = DEFAULT_GRID
    lambda2_grid: GridAxis = DEFAULT_GRID
    simulate: bool = False
    output: Optional[str] = None
    output_dir: Optional[str] = None
    trace: Optional[str] = None
    log_level: int = logging.WARNING

    @property
    def seed(self) -> int:
        return self.seeds[0]

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(
            params=self.params,
            selector=self.selector or RegionSelector.closure(),
            lambda1_grid=self.lambda1_grid,
            lambda2_grid=self.lambda2_grid,
            n_slots=self.n_slots,
            seeds=self.seeds,
            exclusion_band=self.exclusion_band,
            window_count=self.window_count,
            drift_threshold=self.drift_threshold,
            sample_stride=self.sample_stride,
            workers=self.workers,
            simulate=self.simulate,
        )


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


# --- Parser ---

def _add_selector(parser: argparse.ArgumentParser):
    parser.add_argument("--pa", help="Fixed acceptance probability of the relay")
    parser.add_argument("--closure", action="store_true", default=None,
                        help="Use the closure over all acceptance probabilities")


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument("--n-slots", help="Slots per simulation run")
    parser.add_argument("--sample-stride", help="Queue-length sampling interval in slots")


def _add_grid_options(parser: argparse.ArgumentParser):
    for axis in ("lambda1", "lambda2"):
        parser.add_argument(f"--{axis}-min")
        parser.add_argument(f"--{axis}-max")
        parser.add_argument(f"--{axis}-count")
    parser.add_argument("--seeds", help="Comma-separated simulation seeds")
    parser.add_argument("--exclusion-band", help="Skip points whose |analytic margin| is below this")
    parser.add_argument("--window-count")
    parser.add_argument("--drift-threshold")
    parser.add_argument("--workers", help="Parallel simulation processes")
    _add_run_options(parser)


def build_parser() -> CliArgumentParser:
    common = CliArgumentParser(add_help=False, allow_abbrev=False)
    for key in PARAM_KEYS:
        common.add_argument(f"--{key}")
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--verbose", action="store_true", help="Log at INFO")
    common.add_argument("--debug", action="store_true", help="Log at DEBUG")

    parser = CliArgumentParser(prog="relay-region", allow_abbrev=False,
                               description="Stability regions of a random-access relay network")
    subparsers = parser.add_subparsers(dest="command", required=True)

    region = subparsers.add_parser("region", parents=[common], allow_abbrev=False,
                                   help="Trace a region boundary to CSV")
    _add_selector(region)
    region.add_argument("--resolution", help="Number of lambda1 samples")
    region.add_argument("--output", help="CSV path (default: stdout)")

    optimal = subparsers.add_parser("optimal-pa", parents=[common], allow_abbrev=False,
                                    help="Print the optimal acceptance probability")
    optimal.add_argument("--lambda1")

    simulate = subparsers.add_parser("simulate", parents=[common], allow_abbrev=False,
                                     help="Run one slot-level simulation")
    _add_selector(simulate)
    simulate.add_argument("--lambda1")
    simulate.add_argument("--lambda2")
    simulate.add_argument("--mode", choices=[m.value for m in SimMode])
    simulate.add_argument("--seed")
    simulate.add_argument("--trace", help="Per-slot CSV trace path")
    _add_run_options(simulate)

    validate = subparsers.add_parser("validate", parents=[common], allow_abbrev=False,
                                     help="Sweep a grid and compare simulation with the region")
    _add_selector(validate)
    _add_grid_options(validate)
    validate.add_argument("--output", help="CSV path (default: output directory)")
    validate.add_argument("--output-dir")

    compare = subparsers.add_parser("compare", parents=[common], allow_abbrev=False,
                                    help="Compare no, full and partial cooperation on a grid")
    _add_grid_options(compare)
    compare.add_argument("--simulate", action="store_true", default=None,
                         help="Also simulate every grid point")
    compare.add_argument("--output-dir")

    parser.subparsers = {
        "region": region, "optimal-pa": optimal, "simulate": simulate,
        "validate": validate, "compare": compare,
    }
    return parser


def _option_keys(parser: argparse.ArgumentParser) -> List[str]:
    return [action.dest for action in parser._actions if action.option_strings and action.dest != "help"]


# --- Value resolution ---

# Typed getters for the run defaults kept in settings.json.
_SETTING_GETTERS = {
    "n_slots": SettingsManager.get_n_slots,
    "seeds": SettingsManager.get_seeds,
    "sample_stride": SettingsManager.get_sample_stride,
    "window_count": SettingsManager.get_window_count,
    "drift_threshold": SettingsManager.get_drift_threshold,
    "exclusion_band": SettingsManager.get_exclusion_band,
    "resolution": SettingsManager.get_resolution,
    "workers": SettingsManager.get_workers,
    "output_dir": SettingsManager.get_output_dir,
}


class _Resolver:
    """Looks a key up in flags, then config file, then settings, and converts it."""

    def __init__(self, argv: Sequence[str], flags: Dict[str, Any], file_values: Dict[str, str],
                 settings: SettingsManager):
        self.argv = list(argv)
        self.flags = flags
        self.file_values = file_values
        self.settings = settings

    def _position(self, key: str) -> Optional[int]:
        flag = "--" + key.replace("_", "-")
        found = None
        for index, token in enumerate(self.argv):
            if token == flag:
                found = index + 1
            elif token.startswith(flag + "="):
                found = index
        return found

    def raw(self, key: str) -> Tuple[Optional[Any], str, Optional[int]]:
        if self.flags.get(key) is not None:
            return self.flags[key], "flag", self._position(key)
        if key in self.file_values:
            return self.file_values[key], "config", None
        if key in self.settings.settings:
            return self._setting(key), "settings", None
        return None, "", None

    def _setting(self, key: str) -> Any:
        getter = _SETTING_GETTERS.get(key)
        if getter is None:
            return self.settings.get(key)
        try:
            return getter(self.settings)
        except (TypeError, ValueError):
            # left raw so the conversion below reports it as a usage error
            return self.settings.get(key)

    def _fail(self, key: str, value: Any, kind: str, source: str, position: Optional[int]):
        where = f" at argument {position}" if position is not None else f" in {source}"
        raise UsageError(f"--{key.replace('_', '-')}: expected {kind}, got '{value}'{where}",
                         key=key, position=position)

    def _convert(self, key: str, value: Any, kind: type, source: str, position: Optional[int]):
        try:
            number = kind(value)
        except (TypeError, ValueError):
            self._fail(key, value, kind.__name__, source, position)
        if isinstance(number, float) and not math.isfinite(number):
            self._fail(key, value, "a finite number", source, position)
        return number

    def number(self, key: str, kind: type = float, required: bool = False, default=None):
        value, source, position = self.raw(key)
        if value is None:
            if required:
                raise UsageError(f"missing required option --{key.replace('_', '-')}", key=key)
            return default
        return self._convert(key, value, kind, source, position)

    def probability(self, key: str, required: bool = False, default=None) -> Optional[float]:
        value = self.number(key, float, required, default)
        if value is not None and not 0.0 <= value <= 1.0:
            raise UsageError(f"--{key.replace('_', '-')}: {value} out of range [0, 1]", key=key)
        return value

    def positive_int(self, key: str, default=None) -> int:
        value = self.number(key, int, default=default)
        if value is None or value < 1:
            raise UsageError(f"--{key.replace('_', '-')}: must be a positive integer", key=key)
        return value

    def flag(self, key: str) -> bool:
        value, source, _ = self.raw(key)
        if value is None or isinstance(value, bool):
            return bool(value)
        text = str(value).strip().lower()
        if text in ("true", "yes", "1"):
            return True
        if text in ("false", "no", "0"):
            return False
        raise UsageError(f"{key}: expected true or false, got '{value}' in {source}", key=key)

    def text(self, key: str) -> Optional[str]:
        value, _, _ = self.raw(key)
        return None if value is None else str(value)

    def seeds(self) -> Tuple[int, ...]:
        value, source, position = self.raw("seeds")
        items = value if isinstance(value, list) else str(value).split(",")
        seeds = tuple(self._convert("seeds", str(s).strip(), int, source, position) for s in items)
        if not seeds or any(not 0 <= s < 2 ** 64 for s in seeds):
            raise UsageError("--seeds: expected 64-bit unsigned integers", key="seeds")
        return seeds


def _read_config_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}", key="config")


def _resolve_params(resolver: _Resolver) -> SystemParams:
    values = {key: resolver.number(key, float, required=True) for key in PARAM_KEYS}
    params = SystemParams.from_values(**values)
    result = validate_params(params)
    if not result.ok:
        key = result.violations[0].split()[0]
        raise UsageError("invalid parameters: " + "; ".join(result.violations), key=key)
    return params


def _resolve_selector(resolver: _Resolver, required: bool = True) -> Optional[RegionSelector]:
    pa = resolver.probability("pa")
    closure = resolver.flag("closure")
    if pa is not None and closure:
        raise UsageError("--pa and --closure are mutually exclusive", key="pa")
    if closure:
        return RegionSelector.closure()
    if pa is not None:
        return RegionSelector.fixed(pa)
    if required:
        raise UsageError("missing required option --pa or --closure", key="pa")
    return None


def _resolve_axis(resolver: _Resolver, axis: str) -> GridAxis:
    lo = resolver.probability(f"{axis}_min", default=DEFAULT_GRID.minimum)
    hi = resolver.probability(f"{axis}_max", default=DEFAULT_GRID.maximum)
    count = resolver.positive_int(f"{axis}_count", default=DEFAULT_GRID.count)
    if hi < lo:
        raise UsageError(f"--{axis}-max must not be below --{axis}-min", key=f"{axis}_max")
    return GridAxis(lo, hi, count)


def _file_values_for(command: str, parser: CliArgumentParser,
                     file_values: Dict[str, str]) -> Dict[str, str]:
    """Keeps the config keys this command uses; keys no command knows are an error."""
    known = set()
    for sub in parser.subparsers.values():
        known.update(_option_keys(sub))
    relevant = set(_option_keys(parser.subparsers[command]))
    for key in file_values:
        if key not in known:
            raise UsageError(f"unknown config key '{key}'", key=key)
    return {k: v for k, v in file_values.items() if k in relevant and k != "config"}


def parse_config(argv: Sequence[str], config_text: Optional[str] = None,
                 settings: Optional[SettingsManager] = None) -> CliConfig:
    """
    Parses command-line arguments into a CliConfig.

    Args:
        argv (Sequence[str]): Arguments without the program name.
        config_text (str, optional): key=value text; when omitted, the file
            named by --config (if any) is read.
        settings (SettingsManager, optional): Run defaults. Defaults to config/settings.json.

    Raises:
        UsageError: On unknown flags, missing or malformed options.
    """
    parser = build_parser()
    namespace = parser.parse_args(list(argv))
    flags = {k: v for k, v in vars(namespace).items() if v is not None and v is not False}
    command = Command(namespace.command)

    if config_text is None and namespace.config:
        config_text = _read_config_file(namespace.config)
    file_values = _file_values_for(namespace.command, parser,
                                   parse_key_value_text(config_text) if config_text else {})

    resolver = _Resolver(argv, flags, file_values, settings or SettingsManager(CONFIG_DIR))
    params = _resolve_params(resolver)

    log_level = logging.WARNING
    if namespace.verbose:
        log_level = logging.INFO
    if namespace.debug:
        log_level = logging.DEBUG

    options: Dict[str, Any] = {"command": command, "params": params, "log_level": log_level}

    if command is Command.REGION:
        options["selector"] = _resolve_selector(resolver)
        options["resolution"] = resolver.positive_int("resolution")
        if options["resolution"] < 2:
            raise UsageError("--resolution: must be at least 2", key="resolution")
        options["output"] = resolver.text("output")

    elif command is Command.OPTIMAL_PA:
        lambda1 = resolver.probability("lambda1", required=True)
        options["rates"] = RatePoint(lambda1, 0.0)

    elif command is Command.SIMULATE:
        options["selector"] = _resolve_selector(resolver)
        options["rates"] = RatePoint(resolver.probability("lambda1", required=True),
                                     resolver.probability("lambda2", required=True))
        mode = resolver.text("mode")
        if mode is not None:
            try:
                options["mode"] = SimMode(mode)
            except ValueError:
                raise UsageError(f"--mode: unknown mode '{mode}'", key="mode")
        seed = resolver.number("seed", int, default=resolver.seeds()[0])
        if not 0 <= seed < 2 ** 64:
            raise UsageError("--seed: expected a 64-bit unsigned integer", key="seed")
        options["seeds"] = (seed,)
        options["n_slots"] = resolver.positive_int("n_slots")
        options["sample_stride"] = resolver.positive_int("sample_stride")
        options["trace"] = resolver.text("trace")

    else:
        if command is Command.VALIDATE:
            options["selector"] = _resolve_selector(resolver)
            options["simulate"] = True
            options["output"] = resolver.text("output")
        else:
            options["simulate"] = resolver.flag("simulate")
        options["lambda1_grid"] = _resolve_axis(resolver, "lambda1")
        options["lambda2_grid"] = _resolve_axis(resolver, "lambda2")
        options["seeds"] = resolver.seeds()
        options["n_slots"] = resolver.positive_int("n_slots")
        options["sample_stride"] = resolver.positive_int("sample_stride")
        options["window_count"] = resolver.positive_int("window_count")
        options["workers"] = resolver.positive_int("workers")
        options["drift_threshold"] = resolver.number("drift_threshold", float)
        options["exclusion_band"] = resolver.number("exclusion_band", float)
        if options["drift_threshold"] <= 0:
            raise UsageError("--drift-threshold: must be positive", key="drift_threshold")
        if options["exclusion_band"] < 0:
            raise UsageError("--exclusion-band: must be non-negative", key="exclusion_band")
        if options["simulate"] and options["n_slots"] < 10 * options["window_count"]:
            raise UsageError("--n-slots: must be at least 10 * window-count", key="n_slots")
        options["output_dir"] = resolver.text("output_dir")

    return CliConfig(**options)


# --- Execution ---

def _emit(text: str, path: Optional[str], stdout: TextIO):
    if path:
        write_atomic(path, text)
    else:
        stdout.write(text)


def execute(config: CliConfig, stdout: Optional[TextIO] = None) -> int:
    """
    Runs a parsed command and writes its reports.

    Returns:
        int: 0; domain errors propagate as RelayRegionError.
    """
    stdout = stdout or sys.stdout
    params = config.params

    if config.command is Command.REGION:
        trace = boundary_trace(params, config.selector, config.resolution)
        _emit(render_boundary_trace(trace), config.output, stdout)

    elif config.command is Command.OPTIMAL_PA:
        stdout.write("pa_star=%.9f\n" % optimal_pa(params, config.rates.lambda1))

    elif config.command is Command.SIMULATE:
        if config.selector.is_closure:
            policy = closure_policy(config.rates, params)
        else:
            policy = CooperationPolicy(config.selector.pa)
        sim = SimConfig(params=params, policy=policy, rates=config.rates, mode=config.mode,
                        n_slots=config.n_slots, seed=config.seed,
                        sample_stride=config.sample_stride)
        if config.trace:
            with SlotTraceWriter(config.trace) as trace:
                stats = run(sim, on_slot=trace.record)
        else:
            stats = run(sim)
        stdout.write("pa=%.9f\n" % policy.pa)
        stdout.write(stats.summary() + "\n")

    elif config.command is Command.VALIDATE:
        report = sweep(config.sweep_spec())
        path = config.output or get_output_path("validate.csv", config.output_dir)
        write_atomic(path, render_region_report(report))
        stdout.write("agreement=%.9f disagreements=%d\n"
                     % (report.agreement_rate, len(report.disagreements)))

    elif config.command is Command.COMPARE:
        comparison = compare_three_schemes(params, config.sweep_spec(), simulate=config.simulate)
        for name, file_name in COMPARE_FILES.items():
            write_atomic(get_output_path(file_name, config.output_dir),
                         render_region_report(getattr(comparison, name)))
        stdout.write("containment=%s violations=%d\n"
                     % ("ok" if comparison.containment_ok else "violated",
                        len(comparison.containment_violations)))

    return 0


def main(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None,
         stderr: Optional[TextIO] = None) -> int:
    """
    Parses, configures logging and executes; returns the process exit status.
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    stderr = stderr or sys.stderr
    try:
        config = parse_config(argv)
        logging.basicConfig(level=config.log_level, stream=stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        logging.getLogger().setLevel(config.log_level)
        return execute(config, stdout)
    except RelayRegionError as e:
        stderr.write(f"error: {e}\n")
        return e.exit_status
