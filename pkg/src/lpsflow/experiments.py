"""Configuration-driven convergence and robustness experiments.

Configs are flat ``key = value`` text (``#`` comments).  Results go to
a CSV file with a fixed column order; every number is written with 17
significant digits so reruns of the same configuration are bit
identical.  After the data rows of a level sweep, one rate row per
consecutive level pair reports the observed log2 ratios.
"""

import io
import math
from dataclasses import dataclass, field

from . import metrics
from .assembly import METHODS, ParameterRule, StabilizationConfig
from .errors import ConfigurationError, PicardError, SolverError
from .mms import ManufacturedSolution
from .solver import SCHEMES, PicardConfig, TimeGrid, build_mesh, run

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "run_experiment",
    "run_nu_sweep",
    "CSV_COLUMNS",
    "EXIT_OK",
    "EXIT_CONFIG_ERROR",
    "EXIT_SOLVER_FAILURE",
]

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_SOLVER_FAILURE = 2

CSV_COLUMNS = [
    "row", "level", "h", "nu",
    "err_u_L2_final", "err_u_H1_sum", "err_div_sum",
    "err_p_fluct_sum", "err_u_fluct_sum",
    "composite", "p_primitive", "picard_iters_max",
]

_REQUIRED_KEYS = ("method", "degree", "grid", "levels")

_DEFAULTS = {
    "nu": [1e-6],
    "dt": 0.01,
    "t_end": 0.5,
    "scheme": "crank-nicolson",
    "picard_tol": 1e-13,
    "picard_max_iterations": 50,
    "lag_fluctuation": False,
    "out": "results.csv",
}

_KNOWN_KEYS = set(_REQUIRED_KEYS) | set(_DEFAULTS) | {
    "tau_p_coeff", "tau_p_power", "tau_u_coeff", "tau_u_power",
    "mu_coeff", "mu_power",
}


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    degree: int
    grid: int
    levels: tuple
    nu: tuple = (1e-6,)
    dt: float = 0.01
    t_end: float = 0.5
    scheme: str = "crank-nicolson"
    tau_p_coeff: float = None
    tau_p_power: float = None
    tau_u_coeff: float = None
    tau_u_power: float = None
    mu_coeff: float = None
    mu_power: float = None
    picard_tol: float = 1e-13
    picard_max_iterations: int = 50
    lag_fluctuation: bool = False
    out: str = "results.csv"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"method: expected one of {METHODS}, got {self.method!r}")
        if self.degree not in (1, 2, 3):
            raise ConfigurationError(f"degree: must be 1, 2 or 3, got {self.degree!r}")
        if self.grid not in (1, 2):
            raise ConfigurationError(f"grid: must be 1 or 2, got {self.grid!r}")
        if not self.levels:
            raise ConfigurationError("levels: the level range is empty")
        if any(lv < 0 or lv > 10 for lv in self.levels):
            raise ConfigurationError("levels: levels must lie in [0, 10]")
        if not self.nu:
            raise ConfigurationError("nu: the viscosity list is empty")
        if any(v <= 0 for v in self.nu):
            raise ConfigurationError("nu: viscosities must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme: expected one of {sorted(SCHEMES)}")
        # defaults resolved eagerly so serialization is canonical
        stab = StabilizationConfig(self.method,
                                   tau_p=self._rule("tau_p"),
                                   tau_u=self._rule("tau_u"),
                                   mu=self._rule("mu"))
        object.__setattr__(self, "tau_p_coeff", stab.tau_p.coeff)
        object.__setattr__(self, "tau_p_power", stab.tau_p.power)
        if stab.tau_u is not None:
            object.__setattr__(self, "tau_u_coeff", stab.tau_u.coeff)
            object.__setattr__(self, "tau_u_power", stab.tau_u.power)
        if stab.mu is not None:
            object.__setattr__(self, "mu_coeff", stab.mu.coeff)
            object.__setattr__(self, "mu_power", stab.mu.power)
        if self.method == "HALFRATE":
            h_coarse = max(build_mesh(self.grid, lv).h_max for lv in self.levels)
            bad = [v for v in self.nu if v > h_coarse]
            if bad:
                raise ConfigurationError(
                    f"nu: HALFRATE requires nu <= max mesh width {h_coarse:.6g}, got {bad[0]:g}")

    def _rule(self, prefix):
        coeff = getattr(self, prefix + "_coeff")
        power = getattr(self, prefix + "_power")
        if coeff is None and power is None:
            return None
        if coeff is None or power is None:
            raise ConfigurationError(f"{prefix}_coeff and {prefix}_power must be given together")
        return ParameterRule(coeff, power)

    def stabilization(self):
        return StabilizationConfig(self.method,
                                   tau_p=self._rule("tau_p"),
                                   tau_u=self._rule("tau_u"),
                                   mu=self._rule("mu"))

    def time_grid(self):
        return TimeGrid(self.dt, self.t_end, self.scheme)

    def picard(self):
        return PicardConfig(self.picard_tol, self.picard_max_iterations,
                            self.lag_fluctuation)


def _parse_levels(text):
    text = text.strip()
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigurationError(f"levels: empty range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(p) for p in text.split(","))


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


def parse_config(text):
    """Parse the flat key = value format into an ExperimentConfig."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigurationError(f"missing required key(s): {', '.join(missing)}")

    kwargs = {}
    try:
        kwargs["method"] = raw["method"].upper()
        kwargs["degree"] = int(raw["degree"])
        kwargs["grid"] = int(raw["grid"])
        kwargs["levels"] = _parse_levels(raw["levels"])
        if "nu" in raw:
            kwargs["nu"] = tuple(float(v) for v in raw["nu"].split(","))
        for key in ("dt", "t_end", "picard_tol", "tau_p_coeff", "tau_p_power",
                    "tau_u_coeff", "tau_u_power", "mu_coeff", "mu_power"):
            if key in raw:
                kwargs[key] = float(raw[key])
        if "picard_max_iterations" in raw:
            kwargs["picard_max_iterations"] = int(raw["picard_max_iterations"])
        if "lag_fluctuation" in raw:
            kwargs["lag_fluctuation"] = _parse_bool(raw["lag_fluctuation"])
        if "scheme" in raw:
            kwargs["scheme"] = raw["scheme"].strip()
        if "out" in raw:
            kwargs["out"] = raw["out"]
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    return ExperimentConfig(**kwargs)


def _fmt(x):
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return "%.17g" % x


def serialize_config(config):
    """Canonical text form; parse(serialize(c)) == c."""
    lines = [
        f"method = {config.method}",
        f"degree = {config.degree}",
        f"grid = {config.grid}",
        "levels = " + ",".join(str(lv) for lv in config.levels),
        "nu = " + ",".join(_fmt(v) for v in config.nu),
        f"dt = {_fmt(config.dt)}",
        f"t_end = {_fmt(config.t_end)}",
        f"scheme = {config.scheme}",
        f"tau_p_coeff = {_fmt(config.tau_p_coeff)}",
        f"tau_p_power = {_fmt(config.tau_p_power)}",
    ]
    if config.tau_u_coeff is not None:
        lines.append(f"tau_u_coeff = {_fmt(config.tau_u_coeff)}")
        lines.append(f"tau_u_power = {_fmt(config.tau_u_power)}")
    if config.mu_coeff is not None:
        lines.append(f"mu_coeff = {_fmt(config.mu_coeff)}")
        lines.append(f"mu_power = {_fmt(config.mu_power)}")
    lines += [
        f"picard_tol = {_fmt(config.picard_tol)}",
        f"picard_max_iterations = {config.picard_max_iterations}",
        f"lag_fluctuation = {'true' if config.lag_fluctuation else 'false'}",
        f"out = {config.out}",
    ]
    return "\n".join(lines) + "\n"


@dataclass
class ExperimentResult:
    status: int
    rows: list = field(default_factory=list)
    error: str = None
    csv_text: str = None


def _data_row(report):
    s = metrics.report_summary(report)
    return {
        "row": "data",
        "level": report.level,
        "h": report.h,
        "nu": report.nu,
        **{k: s[k] for k in CSV_COLUMNS[4:]},
    }


def _rate_rows(rows):
    """One rate row per consecutive-level pair of data rows (same nu)."""
    out = []
    for prev, cur in zip(rows, rows[1:]):
        if prev["nu"] != cur["nu"]:
            continue
        rate = {"row": "rate", "level": f"{prev['level']}->{cur['level']}", "nu": cur["nu"]}
        span = cur["level"] - prev["level"]
        for col in ("h",) + tuple(CSV_COLUMNS[4:11]):
            a, b = prev[col], cur[col]
            if a is None or b is None or a <= 0 or b <= 0:
                rate[col] = None
            else:
                rate[col] = math.log2(a / b) / span
        rate["picard_iters_max"] = None
        out.append(rate)
    return out


def _write_csv(path, rows):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _run_cell(config, level, nu):
    problem = ManufacturedSolution(nu)
    result = run(problem, config.grid, level, config.degree,
                 config.stabilization(), config.time_grid(),
                 picard=config.picard(), nu=nu, keep_states=False)
    return result.report


def _failure_log(path, level, nu, step, exc):
    message = (f"run failed at level={level} nu={nu:g} step={step}: "
               f"{type(exc).__name__}: {exc}")
    if path is not None:
        with open(str(path) + ".log", "w") as fh:
            fh.write(message + "\n")
    return message


def _step_of(exc, config):
    if isinstance(exc, PicardError) and exc.time is not None:
        return round(exc.time / config.dt)
    return "unknown"


def run_experiment(config, out_path="from-config"):
    """Level sweep over every (level, nu) pair; writes the CSV.

    Returns an ExperimentResult with status 0 on success or 2 when any
    run fails (partial CSV plus .log file are still written).
    """
    if out_path == "from-config":
        out_path = config.out
    rows = []
    for nu in sorted(config.nu):
        data = []
        for level in sorted(config.levels):
            try:
                report = _run_cell(config, level, nu)
            except (PicardError, SolverError) as exc:
                rows.extend(_rate_rows(data))
                _write_csv(out_path, rows)
                msg = _failure_log(out_path, level, nu, _step_of(exc, config), exc)
                return ExperimentResult(EXIT_SOLVER_FAILURE, rows, msg)
            data.append(_data_row(report))
            rows.append(data[-1])
        rows.extend(_rate_rows(data))
    text = _write_csv(out_path, rows)
    return ExperimentResult(EXIT_OK, rows, csv_text=text)


def run_nu_sweep(config, out_path="from-config"):
    """One row per viscosity at a fixed level; no rate rows."""
    if len(config.levels) != 1:
        raise ConfigurationError("nu sweep needs exactly one level")
    if len(config.nu) < 2:
        raise ConfigurationError("nu sweep needs at least two viscosities")
    if out_path == "from-config":
        out_path = config.out
    level = config.levels[0]
    rows = []
    for nu in sorted(config.nu):
        try:
            report = _run_cell(config, level, nu)
        except (PicardError, SolverError) as exc:
            _write_csv(out_path, rows)
            msg = _failure_log(out_path, level, nu, _step_of(exc, config), exc)
            return ExperimentResult(EXIT_SOLVER_FAILURE, rows, msg)
        rows.append(_data_row(report))
    text = _write_csv(out_path, rows)
    return ExperimentResult(EXIT_OK, rows, csv_text=text)
