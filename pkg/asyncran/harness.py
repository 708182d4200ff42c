#!/usr/bin/env python3

## Copyright (C) 2026 The asyncran developers
##
## This file is part of asyncran.
##
## asyncran is free software: you can redistribute it and/or modify
## it under the terms of the GNU General Public License as published by
## the Free Software Foundation, either version 3 of the License, or
## (at your option) any later version.
##
## asyncran is distributed in the hope that it will be useful,
## but WITHOUT ANY WARRANTY; without even the implied warranty of
## MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
## GNU General Public License for more details.
##
## You should have received a copy of the GNU General Public License
## along with asyncran.  If not, see <http://www.gnu.org/licenses/>.

"""Monte Carlo experiments and the ``asyncran`` program.

An :class:`ExperimentPlan` sweeps one parameter of a base
configuration.  At every sweep point, each trial draws one channel
realisation and one true delay from its own seed, designs every
scheme on those channels, and evaluates the designs at one or more
phase offsets.  Results are averaged per scheme and sweep point into
:class:`ResultRow` and written as CSV or JSON.

The program has three subcommands::

    asyncran sweep --preset fig2 --trials 10 --out fig2.csv
    asyncran single --preset fig2 --point 5 --trial 3
    asyncran selftest

Experiments are configured with presets, a flat ``key = value``
configuration file, and command line flags, in increasing order of
precedence.  For example::

    # robust cooperation versus delay spread
    preset = fig2
    snrDb = 20
    sweepVariable = worstCaseDelay
    sweepValues = 0, 1, 2
    schemes = nonCooperative, robust
    trials = 50

"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import multiprocessing
import os
import os.path
import sys
import tempfile
import typing
import unittest
from logging import StreamHandler

import numpy

import asyncran
import asyncran.cccp
import asyncran.model
import asyncran.rates
from asyncran import Scheme, SweepVariable
from asyncran.cccp import CccpOptions
from asyncran.model import SystemConfig


_logger = logging.getLogger(__name__)


RESULT_COLUMNS = (
    "scheme",
    "sweep_variable",
    "sweep_value",
    "trials",
    "avg_min_rate_bits",
    "std_err",
    "avg_iterations",
    "failures",
)

TRIAL_COLUMNS = (
    "scheme",
    "sweep_variable",
    "sweep_value",
    "trial",
    "true_delay",
    "min_rate_bits",
    "iterations",
    "failed",
)

# Exit status when more than this fraction of (trial, scheme) designs
# failed numerically.
FAILURE_FRACTION_LIMIT = 0.1


def _fmt(x: float) -> str:
    return "%.9g" % x


@dataclasses.dataclass(frozen=True)
class ExperimentPlan:
    """What a sweep computes.

    Args:
        base_config: configuration at every sweep point, except for
            the swept parameter.
        sweep_variable: the parameter swept.
        sweep_values: values of the swept parameter.  Phase offsets
            are in degrees and SNRs in dB.
        schemes: schemes designed and evaluated at every trial.
        trials: channel realisations per sweep point.
        master_seed: non-negative seed from which all trial seeds
            derive.
        phase_offsets_deg: phase offsets at which every design is
            evaluated, unless the phase offset is swept.  Rows for all
            but the first are labelled ``<scheme>@<offset>deg``.
        antennas_follow_ues: when sweeping the number of UEs, give
            each RRH half as many antennas as there are UEs.
        cccp: options of the design algorithm.
        workers: number of worker processes.  ``1`` runs trials in
            the calling process.
        output_path: where to write the results.  `None` for stdout.
        output_format: ``"csv"`` or ``"json"``.
        dump_path: if set, where to write every trial's result as CSV.

    """

    base_config: SystemConfig
    sweep_variable: SweepVariable
    sweep_values: typing.Tuple[float, ...]
    schemes: typing.Tuple[Scheme, ...] = asyncran.ALL_SCHEMES
    trials: int = 100
    master_seed: int = 0
    phase_offsets_deg: typing.Tuple[float, ...] = (0.0,)
    antennas_follow_ues: bool = False
    cccp: CccpOptions = CccpOptions()
    workers: int = 1
    output_path: typing.Optional[str] = None
    output_format: str = "csv"
    dump_path: typing.Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("sweep_values", "schemes", "phase_offsets_deg"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.sweep_values:
            raise asyncran.ConfigurationError("no sweep values")
        if not self.schemes:
            raise asyncran.ConfigurationError("no schemes")
        if not self.phase_offsets_deg:
            raise asyncran.ConfigurationError("no phase offsets")
        if self.trials < 1:
            raise asyncran.ConfigurationError("trials must be at least 1")
        if self.master_seed < 0:
            raise asyncran.ConfigurationError("seed must be non-negative")
        if self.workers < 1:
            raise asyncran.ConfigurationError("workers must be at least 1")
        if self.output_format not in ("csv", "json"):
            raise asyncran.ConfigurationError(
                "unknown output format '%s'" % self.output_format
            )
        if any(not math.isfinite(v) for v in self.sweep_values):
            raise asyncran.ConfigurationError("sweep values must be finite")
        # Check every sweep point now rather than halfway through.
        for value in self.sweep_values:
            point_config(self, value)

    def point_labels(
        self, value: float
    ) -> typing.List[typing.Tuple[str, Scheme, float]]:
        """Row label, scheme and phase offset in degrees of every row of
        a sweep point."""
        if self.sweep_variable is SweepVariable.PHASE_OFFSET_DEG:
            return [(str(s), s, value) for s in self.schemes]
        labels = []
        for i, theta in enumerate(self.phase_offsets_deg):
            for s in self.schemes:
                label = str(s) if i == 0 else "%s@%gdeg" % (s, theta)
                labels.append((label, s, theta))
        return labels


def _integral(value: float, name: str, minimum: int) -> int:
    if value != int(value) or value < minimum:
        raise asyncran.ConfigurationError(
            "%s must be an integer not below %d, got %g"
            % (name, minimum, value)
        )
    return int(value)


def point_config(plan: ExperimentPlan, value: float) -> SystemConfig:
    """System configuration of the sweep point ``value``.

    The phase offset of the returned configuration is the one of the
    sweep point when sweeping phase offsets, and zero otherwise.
    """
    base = plan.base_config.replace(phase_offset_eval=0.0)
    variable = plan.sweep_variable
    if variable is SweepVariable.SNR_DB:
        power = asyncran.model.db_to_linear(value)
        return base.replace(power_rrh1=power, power_rrh2=power)
    if variable is SweepVariable.PHASE_OFFSET_DEG:
        return base.replace(phase_offset_eval=math.radians(value))
    if variable is SweepVariable.WORST_CASE_DELAY:
        delay = _integral(value, "worstCaseDelay", 0)
        return base.replace(worst_case_delay=delay)

    num_ues = _integral(value, "numUes", 1)
    changes = dict(
        num_ues=num_ues,
        antennas_ue=(plan.base_config.antennas_ue[0],) * num_ues,
    )
    if plan.antennas_follow_ues:
        if num_ues % 2:
            raise asyncran.ConfigurationError(
                "antennas follow UEs needs an even number of UEs, got %d"
                % num_ues
            )
        changes.update(
            antennas_rrh1=num_ues // 2, antennas_rrh2=num_ues // 2
        )
    return base.replace(**changes)


class TrialRecord(typing.NamedTuple):
    label: str
    sweep_index: int
    trial: int
    true_delay: int
    min_rate: float
    iterations: int
    failed: bool


class ResultRow(typing.NamedTuple):
    """Average over trials of one scheme at one sweep point.

    ``trials`` counts the trials used in the averages, ``failures``
    those excluded because the design failed numerically.
    """

    scheme: str
    sweep_variable: str
    sweep_value: float
    trials: int
    avg_min_rate: float
    std_err: float
    avg_iterations: float
    failures: int

    def formatted(self) -> typing.List[str]:
        return [
            self.scheme,
            self.sweep_variable,
            _fmt(self.sweep_value),
            str(self.trials),
            _fmt(self.avg_min_rate),
            _fmt(self.std_err),
            _fmt(self.avg_iterations),
            str(self.failures),
        ]


def trial_seeds(
    master_seed: int, sweep_index: int, trial: int
) -> typing.Tuple[numpy.random.SeedSequence, numpy.random.SeedSequence]:
    """Seeds of the channels and of the true delay of one trial."""
    sequence = numpy.random.SeedSequence([master_seed, sweep_index, trial])
    channel_seed, delay_seed = sequence.spawn(2)
    return channel_seed, delay_seed


def run_trial(
    plan: ExperimentPlan, sweep_index: int, trial: int
) -> typing.List[TrialRecord]:
    """Design and evaluate every scheme on one channel realisation.

    All schemes see the same channels.  Designs assume no phase
    offset and are evaluated at each of the sweep point's offsets.
    """
    value = plan.sweep_values[sweep_index]
    config = point_config(plan, value)
    design_config = config.replace(phase_offset_eval=0.0)
    channel_seed, delay_seed = trial_seeds(
        plan.master_seed, sweep_index, trial
    )
    channels = asyncran.model.sample_channels(config, channel_seed)
    true_delay = int(
        numpy.random.default_rng(delay_seed).integers(
            0, config.worst_case_delay + 1
        )
    )
    traces = asyncran.cccp.run_scheme_traces(
        design_config,
        channels,
        plan.schemes,
        plan.cccp,
        genie_delay=true_delay,
    )

    records = []
    rotated = {}
    for label, scheme, theta in plan.point_labels(value):
        trace = traces[scheme]
        if theta not in rotated:
            rotated[theta] = asyncran.model.apply_phase_offset(
                channels, math.radians(theta)
            )
        report = asyncran.rates.worst_case_rates(
            trace.final_solution,
            rotated[theta],
            design_config,
            asyncran.cccp.evaluation_delays(design_config, trace.scheme),
        )
        records.append(
            TrialRecord(
                label,
                sweep_index,
                trial,
                true_delay,
                report.min_rate,
                trace.iterations,
                trace.failed,
            )
        )
    return records


def _run_trial_task(task) -> typing.List[TrialRecord]:
    return run_trial(*task)


def aggregate(
    plan: ExperimentPlan, records: typing.Iterable[TrialRecord]
) -> typing.List[ResultRow]:
    """Average trial records, in sweep and scheme order."""
    grouped = {}
    for record in records:
        key = (record.sweep_index, record.label)
        grouped.setdefault(key, []).append(record)

    rows = []
    for sweep_index, value in enumerate(plan.sweep_values):
        for label, _, _ in plan.point_labels(value):
            group = grouped.get((sweep_index, label), [])
            used = [r for r in group if not r.failed]
            rates = numpy.array([r.min_rate for r in used])
            iterations = numpy.array([r.iterations for r in used])
            if len(used) == 0:
                mean = std_err = avg_iterations = math.nan
            else:
                mean = float(rates.mean())
                avg_iterations = float(iterations.mean())
                std_err = 0.0
                if len(used) > 1:
                    std_err = float(
                        rates.std(ddof=1) / math.sqrt(len(used))
                    )
            rows.append(
                ResultRow(
                    label,
                    plan.sweep_variable.value,
                    value,
                    len(used),
                    mean,
                    std_err,
                    avg_iterations,
                    len(group) - len(used),
                )
            )
    return rows


def _init_worker(level: int) -> None:
    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
    configure_logging(level, multiprocessing.current_process().name)


def sweep_records(plan: ExperimentPlan) -> typing.List[TrialRecord]:
    """Run every trial of ``plan``, in sweep then trial order."""
    tasks = [
        (plan, sweep_index, trial)
        for sweep_index in range(len(plan.sweep_values))
        for trial in range(plan.trials)
    ]
    records = []
    if plan.workers == 1:
        results = map(_run_trial_task, tasks)
        for i, trial_records in enumerate(results):
            records.extend(trial_records)
            _log_progress(i + 1, len(tasks))
        return records

    level = logging.getLogger().getEffectiveLevel()
    with multiprocessing.Pool(
        plan.workers, initializer=_init_worker, initargs=(level,)
    ) as pool:
        for i, trial_records in enumerate(pool.imap(_run_trial_task, tasks)):
            records.extend(trial_records)
            _log_progress(i + 1, len(tasks))
    return records


def _log_progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 10) == 0:
        _logger.info("finished %d of %d trials", done, total)


def run_sweep(plan: ExperimentPlan) -> typing.List[ResultRow]:
    """Run all trials of ``plan`` and average them per scheme and point.

    Trials whose design failed numerically are excluded from the
    averages and counted in :attr:`ResultRow.failures`.  The per-trial
    records are written to ``plan.dump_path`` if set.
    """
    records = sweep_records(plan)
    if plan.dump_path is not None:
        write_trial_dump(plan, records, plan.dump_path)
    return aggregate(plan, records)


def failure_fraction(rows: typing.Sequence[ResultRow]) -> float:
    total = sum(r.trials + r.failures for r in rows)
    if total == 0:
        return 0.0
    return sum(r.failures for r in rows) / total


def format_results(rows: typing.Sequence[ResultRow], fmt: str) -> str:
    """Results as CSV or JSON text, floats at 9 significant digits.

    JSON has no NaN, so rates that are not finite are written as
    ``null`` there.  CSV keeps the ``nan`` text.
    """
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(row.formatted())
        return buffer.getvalue()
    if fmt == "json":
        entries = []
        for row in rows:
            entry = {}
            for column, text, raw in zip(
                RESULT_COLUMNS, row.formatted(), row
            ):
                if isinstance(raw, str):
                    entry[column] = raw
                elif isinstance(raw, int):
                    entry[column] = raw
                elif math.isfinite(raw):
                    entry[column] = float(text)
                else:
                    # Points with no finite rate.
                    entry[column] = None
            entries.append(entry)
        return json.dumps(entries, indent=2, allow_nan=False) + "\n"
    raise asyncran.OutputError("unknown output format '%s'" % fmt)


def _write_atomically(text: str, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".asyncran-")
    except OSError as ex:
        raise asyncran.OutputError("cannot write to '%s': %s" % (path, ex))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp_path, path)
    except OSError as ex:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise asyncran.OutputError("cannot write to '%s': %s" % (path, ex))


def emit_results(
    rows: typing.Sequence[ResultRow], fmt: str, path: str
) -> None:
    """Write results to ``path``.

    Raises:
        OutputError: if there are no rows, the format is unknown, or
            ``path`` cannot be written.  No file is left behind.

    """
    if not rows:
        raise asyncran.OutputError("no results to write")
    _write_atomically(format_results(rows, fmt), path)
    _logger.info("wrote %d result rows to '%s'", len(rows), path)


def write_trial_dump(
    plan: ExperimentPlan, records: typing.Sequence[TrialRecord], path: str
) -> None:
    """Write every trial record as CSV, for auditing the averages."""
    if not records:
        raise asyncran.OutputError("no trial records to write")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRIAL_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.label,
                plan.sweep_variable.value,
                _fmt(plan.sweep_values[r.sweep_index]),
                r.trial,
                r.true_delay,
                _fmt(r.min_rate),
                r.iterations,
                int(r.failed),
            ]
        )
    _write_atomically(buffer.getvalue(), path)
    _logger.info("wrote %d trial records to '%s'", len(records), path)


PRESETS = {
    "fig2": {
        "numUes": "2",
        "antennasRrh1": "1",
        "antennasRrh2": "1",
        "antennasUe": "1",
        "worstCaseDelay": "1",
        "snrDb": "10",
        "phaseOffsetDeg": "0",
        "sweepVariable": "snrDb",
        "sweepValues": "-5, 0, 5, 10, 15, 20",
        "schemes": ", ".join(str(s) for s in asyncran.ALL_SCHEMES),
        "trials": "100",
    },
    "fig3": {
        "numUes": "2",
        "antennasRrh1": "1",
        "antennasRrh2": "1",
        "antennasUe": "1",
        "worstCaseDelay": "1",
        "snrDb": "10",
        "phaseOffsetDeg": "0, 20, 45",
        "sweepVariable": "numUes",
        "sweepValues": "2, 4, 6, 8",
        "antennasFollowUes": "true",
        "schemes": "txSelection, nonCooperative, robust, nonRobustCoop",
        "trials": "100",
    },
}

_DEFAULTS = {
    "numUes": "2",
    "antennasRrh1": "1",
    "antennasRrh2": "1",
    "antennasUe": "1",
    "worstCaseDelay": "1",
    "snrDb": "10",
    "phaseOffsetDeg": "0",
    "schemes": ", ".join(str(s) for s in asyncran.ALL_SCHEMES),
    "trials": "100",
    "masterSeed": "0",
    "format": "csv",
    "maxOuter": "50",
    "tolOuter": "1e-5",
    "workers": "1",
    "warmStart": "true",
    "antennasFollowUes": "false",
}

_KNOWN_KEYS = set(_DEFAULTS) | {
    "preset",
    "sweepVariable",
    "sweepValues",
    "powerRrh1Db",
    "powerRrh2Db",
    "outputPath",
    "dumpTrials",
}


def parse_config_text(text: str) -> typing.Dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    settings = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise asyncran.ConfigurationError(
                "line %d: expected 'key = value'" % lineno
            )
        if key not in _KNOWN_KEYS:
            raise asyncran.ConfigurationError(
                "line %d: unknown key '%s'" % (lineno, key)
            )
        settings[key] = value.strip()
    return settings


def load_config_file(path: str) -> typing.Dict[str, str]:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as ex:
        raise asyncran.ConfigurationError(
            "cannot read config file '%s': %s" % (path, ex)
        )
    return parse_config_text(text)


def _convert(settings, key, convert, what):
    text = settings[key]
    try:
        return convert(text)
    except ValueError:
        raise asyncran.ConfigurationError(
            "%s must be %s, got '%s'" % (key, what, text)
        )


def _float_list(text: str) -> typing.Tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(text)


def _sweep_variable(text: str) -> SweepVariable:
    return SweepVariable(text.strip())


def merged_settings(
    file_settings: typing.Mapping[str, str],
    overrides: typing.Mapping[str, str],
) -> typing.Dict[str, str]:
    """Defaults, then preset, then file settings, then overrides."""
    preset = overrides.get("preset", file_settings.get("preset"))
    settings = dict(_DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise asyncran.ConfigurationError(
                "unknown preset '%s' (expected one of %s)"
                % (preset, ", ".join(sorted(PRESETS)))
            )
        settings.update(PRESETS[preset])
    settings.update(file_settings)
    settings.update(overrides)
    return settings


def plan_from_settings(settings: typing.Mapping[str, str]) -> ExperimentPlan:
    """Build an :class:`ExperimentPlan` from merged string settings."""
    unknown = set(settings) - _KNOWN_KEYS
    if unknown:
        raise asyncran.ConfigurationError(
            "unknown keys: %s" % ", ".join(sorted(unknown))
        )
    for key in ("sweepVariable", "sweepValues"):
        if key not in settings:
            raise asyncran.ConfigurationError("missing key '%s'" % key)

    snr_db = _convert(settings, "snrDb", float, "a number")
    powers = []
    for key in ("powerRrh1Db", "powerRrh2Db"):
        db = snr_db
        if key in settings:
            db = _convert(settings, key, float, "a number")
        powers.append(asyncran.model.db_to_linear(db))
    num_ues = _convert(settings, "numUes", int, "an integer")
    phases = _convert(settings, "phaseOffsetDeg", _float_list, "numbers")
    if not phases:
        raise asyncran.ConfigurationError("phaseOffsetDeg is empty")
    base_config = SystemConfig(
        num_ues=num_ues,
        antennas_rrh1=_convert(settings, "antennasRrh1", int, "an integer"),
        antennas_rrh2=_convert(settings, "antennasRrh2", int, "an integer"),
        antennas_ue=(_convert(settings, "antennasUe", int, "an integer"),)
        * max(num_ues, 0),
        worst_case_delay=_convert(
            settings, "worstCaseDelay", int, "an integer"
        ),
        power_rrh1=powers[0],
        power_rrh2=powers[1],
        phase_offset_eval=math.radians(phases[0]),
    )
    cccp = CccpOptions(
        max_outer=_convert(settings, "maxOuter", int, "an integer"),
        tol_outer=_convert(settings, "tolOuter", float, "a number"),
        warm_start=_convert(settings, "warmStart", _bool, "a boolean"),
    )
    schemes = tuple(
        Scheme.parse(name)
        for name in settings["schemes"].split(",")
        if name.strip()
    )
    return ExperimentPlan(
        base_config=base_config,
        sweep_variable=_convert(
            settings,
            "sweepVariable",
            _sweep_variable,
            "one of %s" % ", ".join(v.value for v in SweepVariable),
        ),
        sweep_values=_convert(settings, "sweepValues", _float_list, "numbers"),
        schemes=schemes,
        trials=_convert(settings, "trials", int, "an integer"),
        master_seed=_convert(settings, "masterSeed", int, "an integer"),
        phase_offsets_deg=phases,
        antennas_follow_ues=_convert(
            settings, "antennasFollowUes", _bool, "a boolean"
        ),
        cccp=cccp,
        workers=_convert(settings, "workers", int, "an integer"),
        output_path=settings.get("outputPath"),
        output_format=settings["format"],
        dump_path=settings.get("dumpTrials"),
    )


def _create_log_formatter(name: str) -> logging.Formatter:
    """Formatter that names the process a message comes from.

    Trials may run in worker processes whose messages all go to the
    same stderr.
    """
    return logging.Formatter(
        "%%(asctime)s:%s (%%(name)s):%%(levelname)s"
        ":PID %%(process)s: %%(message)s" % name
    )


class RepetitionFilter(logging.Filter):
    """Aggregate, then suppress, runs of identical log messages.

    The same solver warning can be emitted for many trials in a row.
    The first ``aggregate_at - 1`` repetitions pass unchanged, then
    one message in ``repeat_every`` passes with a count, and after
    ``stop_at`` repetitions the run is silenced until another message
    comes.
    """

    def __init__(
        self, aggregate_at: int = 3, repeat_every: int = 5, stop_at: int = 18
    ) -> None:
        super().__init__()
        self.aggregate_at = aggregate_at
        self.repeat_every = repeat_every
        self.stop_at = stop_at
        self._last = None
        self._count = 0

    def filter(self, record: logging.LogRecord) -> bool:
        key = (record.levelno, record.msg)
        self._count = self._count + 1 if key == self._last else 1
        self._last = key
        if self._count < self.aggregate_at:
            return True
        if self._count == self.aggregate_at:
            record.msg = "Aggregating repetitions of: %s" % record.msg
            return True
        if self._count == self.stop_at:
            record.msg = "Suppressing repetitions of: %s" % record.msg
            return True
        if self._count < self.stop_at:
            since = self._count - self.aggregate_at
            if since % self.repeat_every == 0:
                record.msg = "%d times: %s" % (self.repeat_every, record.msg)
                return True
        return False


def configure_logging(level: int, name: str = "asyncran") -> None:
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    stderr_handler = StreamHandler(sys.stderr)
    stderr_handler.setFormatter(_create_log_formatter(name))
    stderr_handler.addFilter(RepetitionFilter())
    root_logger.addHandler(stderr_handler)


def _add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        action="store",
        type=str,
        metavar="CONFIG-FILEPATH",
        help="Path to a key = value configuration file",
    )
    parser.add_argument(
        "--preset",
        action="store",
        choices=sorted(PRESETS),
        help="Start from the settings of a preset experiment",
    )
    parser.add_argument(
        "--schemes",
        action="store",
        type=str,
        help="Comma separated schemes, e.g., 'robust,syncGenie:1'",
    )
    parser.add_argument(
        "--seed", action="store", type=int, help="Master seed"
    )
    parser.add_argument(
        "--worst-case-delay",
        action="store",
        type=int,
        help="Largest possible time offset, in channel uses",
    )
    parser.add_argument(
        "--max-outer",
        action="store",
        type=int,
        help="Largest number of CCCP iterations",
    )
    parser.add_argument(
        "--no-warm-start",
        action="store_true",
        help="Start every scheme from the scaled identity",
    )


def _parse_cmd_line_args(args: typing.Sequence[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="asyncran")
    parser.add_argument(
        "--logging-level",
        action="store",
        type=str,
        default="info",
        choices=["debug", "info", "warning", "error", "critical"],
        help="Set logging level",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    sweep = subparsers.add_parser(
        "sweep", help="Average worst-case rates over a parameter sweep"
    )
    _add_experiment_arguments(sweep)
    sweep.add_argument(
        "--trials", action="store", type=int, help="Trials per point"
    )
    sweep.add_argument(
        "--out",
        action="store",
        type=str,
        metavar="FILEPATH",
        help="Output file (default: standard output)",
    )
    sweep.add_argument(
        "--format",
        action="store",
        choices=["csv", "json"],
        help="Output format",
    )
    sweep.add_argument(
        "--dump-trials",
        action="store",
        type=str,
        metavar="FILEPATH",
        help="Also write the result of every trial to this CSV file",
    )
    sweep.add_argument(
        "--workers",
        action="store",
        type=int,
        help="Number of worker processes",
    )

    single = subparsers.add_parser(
        "single", help="Rates and CCCP traces of a single trial"
    )
    _add_experiment_arguments(single)
    single.add_argument(
        "--point",
        action="store",
        type=int,
        default=0,
        help="Index of the sweep value to use",
    )
    single.add_argument(
        "--trial",
        action="store",
        type=int,
        default=0,
        help="Index of the trial, as in a sweep",
    )

    subparsers.add_parser("selftest", help="Run the invariant test suites")
    return parser.parse_args(args)


def _overrides(parsed: argparse.Namespace) -> typing.Dict[str, str]:
    flags = {
        "preset": "preset",
        "schemes": "schemes",
        "seed": "masterSeed",
        "worst_case_delay": "worstCaseDelay",
        "max_outer": "maxOuter",
        "trials": "trials",
        "out": "outputPath",
        "format": "format",
        "dump_trials": "dumpTrials",
        "workers": "workers",
    }
    overrides = {}
    for attr, key in flags.items():
        value = getattr(parsed, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(parsed, "no_warm_start", False):
        overrides["warmStart"] = "false"
    return overrides


def _plan_from_args(parsed: argparse.Namespace) -> ExperimentPlan:
    file_settings = {}
    if parsed.config:
        file_settings = load_config_file(parsed.config)
    settings = merged_settings(file_settings, _overrides(parsed))
    return plan_from_settings(settings)


def _sweep_command(parsed: argparse.Namespace) -> int:
    plan = _plan_from_args(parsed)
    rows = run_sweep(plan)
    if plan.output_path is None:
        if not rows:
            raise asyncran.OutputError("no results to write")
        sys.stdout.write(format_results(rows, plan.output_format))
    else:
        emit_results(rows, plan.output_format, plan.output_path)
    fraction = failure_fraction(rows)
    if fraction > FAILURE_FRACTION_LIMIT:
        _logger.error(
            "%.1f%% of the designs failed numerically", 100 * fraction
        )
        return 2
    return 0


def describe_trace(trace: asyncran.cccp.CccpTrace) -> str:
    """Human readable rate table and CCCP history of one design."""
    report = trace.final_report
    lines = [
        "%s: min rate %.6f bits, %d iterations, %s"
        % (
            trace.scheme,
            report.min_rate,
            trace.iterations,
            "failed"
            if trace.failed
            else ("converged" if trace.converged else "not converged"),
        ),
        "  delays:    " + " ".join("%9d" % d for d in report.delays),
    ]
    for k, per_delay in enumerate(report.per_pair):
        lines.append(
            "  UE %-6d " % k
            + " ".join("%9.6f" % r for r in per_delay)
            + "   worst %.6f" % report.per_ue[k]
        )
    lines.append(
        "  objective: " + ", ".join("%.6f" % v for v in trace.objective)
    )
    lines.append(
        "  statuses:  " + ", ".join(s.name for s in trace.statuses)
    )
    return "\n".join(lines)


def _single_command(parsed: argparse.Namespace) -> int:
    plan = _plan_from_args(parsed)
    if not 0 <= parsed.point < len(plan.sweep_values):
        raise asyncran.ConfigurationError(
            "point must be in 0..%d" % (len(plan.sweep_values) - 1)
        )
    if parsed.trial < 0:
        raise asyncran.ConfigurationError("trial must be non-negative")
    value = plan.sweep_values[parsed.point]
    config = point_config(plan, value)
    channel_seed, delay_seed = trial_seeds(
        plan.master_seed, parsed.point, parsed.trial
    )
    channels = asyncran.model.sample_channels(config, channel_seed)
    true_delay = int(
        numpy.random.default_rng(delay_seed).integers(
            0, config.worst_case_delay + 1
        )
    )
    print(
        "%s = %g, trial %d, true delay %d"
        % (plan.sweep_variable.value, value, parsed.trial, true_delay)
    )
    traces = asyncran.cccp.run_scheme_traces(
        config, channels, plan.schemes, plan.cccp, genie_delay=true_delay
    )
    for scheme in plan.schemes:
        print(describe_trace(traces[scheme]))
    return 0


# Fast invariant suites run by the selftest command.
SELFTEST_MODULES = (
    "asyncran.testsuite.test_model",
    "asyncran.testsuite.test_rates",
    "asyncran.testsuite.test_surrogate",
)


def _selftest_command(parsed: argparse.Namespace) -> int:
    suite = unittest.defaultTestLoader.loadTestsFromNames(SELFTEST_MODULES)
    result = unittest.TextTestRunner(stream=sys.stderr, verbosity=1).run(
        suite
    )
    return 0 if result.wasSuccessful() else 1


def main(argv: typing.Sequence[str]) -> int:
    parsed = _parse_cmd_line_args(argv[1:])
    configure_logging(getattr(logging, parsed.logging_level.upper()))

    commands = {
        "sweep": _sweep_command,
        "single": _single_command,
        "selftest": _selftest_command,
    }
    try:
        return commands[parsed.command](parsed)
    except asyncran.ConfigurationError as ex:
        _logger.error("invalid configuration: %s", ex)
        return 1
    except asyncran.OutputError as ex:
        _logger.error("%s", ex)
        return 1


def _setuptools_entry_point() -> int:
    # The setuptools entry point must be a function, we can't simply
    # name this module even if this module does work as a script.
    return main(sys.argv)


if __name__ == "__main__":
    sys.exit(main(sys.argv))
