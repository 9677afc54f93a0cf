"""Monte-Carlo BER experiments: configuration, seeded parallel trials, CSV output.

Config file grammar
-------------------
One ``key = value`` pair per line. ``#`` starts a comment, blank lines are
ignored, keys are case-insensitive. Lists are comma separated. Detector
options use dotted keys, e.g. ``hmc-t.step_scale = 0.8`` or
``mgs.restarts = 5``. Recognized keys::

    n, m, modulation, rho, detectors, snr_grid_db | (snr_start, snr_stop,
    snr_step), trials, master_seed, snr_convention, out, threads,
    record_timing, trace

Detector ids: ``hmc-t``, ``hmc-normal``, ``mgs``, ``mmse``, ``ml``.
"""

import csv
import hashlib
import io
import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.stats import binomtest

from .baselines import ML_MAX_CANDIDATES, detect_ml_bruteforce, detect_mmse, ml_candidate_count
from .channel import (
    SNR_CONVENTIONS,
    apply_kronecker_correlation,
    complex_to_real,
    draw_rayleigh_channel,
    noise_sigma_from_snr,
    simulate_received,
)
from .constellation import build_constellation, count_bit_errors, modulate_bits, normalize_modulation, random_bits
from .hmc import TOTAL_STEP_BUDGET, HmcConfig, detect_hmc
from .mgs import MgsConfig, detect_mgs
from .posterior import build_posterior
from .priors import PriorFamily, PriorSpec, tuned_prior
from .rng import ROLE_BITS, ROLE_CHANNEL, ROLE_DETECTOR, ROLE_NOISE, substream

CSV_COLUMNS = (
    "detector",
    "modulation",
    "rho",
    "snr_db",
    "trials",
    "total_bits",
    "bit_errors",
    "ber",
    "acceptance_rate",
    "seconds_per_trial",
)

DETECTOR_KINDS = {
    "hmc-t": ("hmc", PriorFamily.MIXTURE_T),
    "hmc-normal": ("hmc", PriorFamily.MIXTURE_NORMAL),
    "mgs": ("mgs", None),
    "mmse": ("mmse", None),
    "ml": ("ml", None),
}

# options a detector id accepts, with their parsers
_PRIOR_OPTIONS = {"sigma": float, "nu": float}
_HMC_OPTIONS = {
    "steps_per_chain": int,
    "n_chains": int,
    "leapfrog_steps": int,
    "step_size": float,
    "init_box": float,
    "step_scale": float,
}
_MGS_OPTIONS = {
    "total_steps": int,
    "restarts": int,
    "mixing_alpha": float,
    "temperature": float,
    "split_steps": lambda s: _parse_bool(s, "split_steps"),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


def _parse_bool(text, name):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {text!r}")


@dataclass(frozen=True)
class DetectorSpec:
    """A detector id plus its option overrides."""

    name: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in DETECTOR_KINDS:
            raise ConfigError(f"detectors: unknown detector {self.name!r} (known: {', '.join(DETECTOR_KINDS)})")
        kind, family = DETECTOR_KINDS[self.name]
        allowed = {"hmc": {**_HMC_OPTIONS, **_PRIOR_OPTIONS}, "mgs": _MGS_OPTIONS}.get(kind, {})
        for key in self.options:
            if key not in allowed:
                raise ConfigError(f"{self.name}.{key}: option not recognized for this detector")
        try:
            if kind == "hmc":
                HmcConfig(**{k: v for k, v in self.options.items() if k in _HMC_OPTIONS})
                for k in _PRIOR_OPTIONS:
                    if k in self.options and not self.options[k] > 0:
                        raise ValueError(f"{k} must be positive")
            elif kind == "mgs":
                MgsConfig(**self.options)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.name}: {exc}") from None

    @property
    def kind(self):
        return DETECTOR_KINDS[self.name][0]

    @property
    def role(self):
        # stable per-name tag, so adding a detector never shifts another's stream
        return ROLE_DETECTOR + zlib.crc32(self.name.encode())

    def build(self, modulation):
        """Return ``detect(sys, c, seed_seq) -> DetectionResult``."""
        kind, family = DETECTOR_KINDS[self.name]
        if kind == "hmc":
            prior = tuned_prior(modulation, family, self.options.get("sigma"), self.options.get("nu"))
            hmc_cfg = HmcConfig(**{k: v for k, v in self.options.items() if k in _HMC_OPTIONS})
            return lambda sys, c, ss: detect_hmc(build_posterior(sys, prior), c, hmc_cfg, ss)
        if kind == "mgs":
            mgs_cfg = MgsConfig(**self.options)
            prior = PriorSpec(PriorFamily.MULTINOMIAL, build_constellation(modulation).pam)
            return lambda sys, c, ss: detect_mgs(build_posterior(sys, prior), c, mgs_cfg, ss)
        if kind == "mmse":
            return lambda sys, c, ss: detect_mmse(sys, c)
        return lambda sys, c, ss: detect_ml_bruteforce(sys, c)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one BER sweep.

    ``threads`` only affects speed; results depend on ``master_seed`` alone.
    With ``record_timing=False`` the ``seconds_per_trial`` column is left
    empty so the CSV is byte-reproducible.
    """

    n: int = 4
    m: int = 4
    modulation: str = "QPSK"
    rho: float = 0.0
    detectors: tuple = ("hmc-t", "hmc-normal", "mgs", "mmse")
    snr_grid_db: tuple = (0.0, 5.0, 10.0)
    trials: int = 100
    master_seed: int = 0
    snr_convention: str = "per-antenna-unit-power"
    out: str | None = None
    threads: int = 1
    record_timing: bool = True
    trace: str | None = None

    def __post_init__(self):
        for name in ("n", "m", "trials", "threads"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {value!r}")
        try:
            object.__setattr__(self, "modulation", normalize_modulation(self.modulation))
        except ValueError as exc:
            raise ConfigError(f"modulation: {exc}") from None
        if not 0.0 <= float(self.rho) < 1.0:
            raise ConfigError(f"rho: must lie in [0, 1), got {self.rho!r}")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid or not all(math.isfinite(s) for s in grid):
            raise ConfigError("snr_grid_db: must be a non-empty list of finite values")
        object.__setattr__(self, "snr_grid_db", grid)
        dets = tuple(d if isinstance(d, DetectorSpec) else DetectorSpec(d) for d in self.detectors)
        if not dets:
            raise ConfigError("detectors: at least one detector is required")
        names = [d.name for d in dets]
        if len(set(names)) != len(names):
            raise ConfigError("detectors: duplicate detector id")
        object.__setattr__(self, "detectors", dets)
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed: must be a 64-bit unsigned integer, got {self.master_seed!r}")
        if self.snr_convention not in SNR_CONVENTIONS:
            raise ConfigError(f"snr_convention: expected one of {SNR_CONVENTIONS}, got {self.snr_convention!r}")

    @property
    def detector_names(self):
        return tuple(d.name for d in self.detectors)


_SCALARS = {
    "n": int,
    "m": int,
    "modulation": str,
    "rho": float,
    "trials": int,
    "master_seed": int,
    "snr_convention": str,
    "out": str,
    "threads": int,
    "trace": str,
}


def _float_list(text, name):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def snr_range(start, stop, step):
    """Inclusive grid ``start, start+step, ..., <= stop``."""
    if step <= 0:
        raise ConfigError(f"snr_step: must be positive, got {step!r}")
    if stop < start:
        raise ConfigError("snr_stop: must not be below snr_start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def config_from_mapping(values, base=None):
    """Build a config from ``{key: text}`` pairs (file entries or CLI overrides)."""
    kwargs = {} if base is None else {f.name: getattr(base, f.name) for f in fields(base)}
    options = {} if base is None else {d.name: dict(d.options) for d in base.detectors}
    grid_parts = {}
    for raw_key, value in values.items():
        key = raw_key.strip().lower()
        if "." in key:
            det, opt = key.split(".", 1)
            kind = DETECTOR_KINDS.get(det, (None,))[0]
            parsers = {"hmc": {**_HMC_OPTIONS, **_PRIOR_OPTIONS}, "mgs": _MGS_OPTIONS}.get(kind, {})
            if opt not in parsers:
                raise ConfigError(f"{key}: unknown detector option")
            try:
                options.setdefault(det, {})[opt] = parsers[opt](value)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {value!r}") from None
        elif key in _SCALARS:
            try:
                kwargs[key] = _SCALARS[key](value)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {value!r} as {_SCALARS[key].__name__}") from None
        elif key == "detectors":
            kwargs[key] = [d.strip().lower() for d in str(value).split(",") if d.strip()]
        elif key == "snr_grid_db":
            kwargs[key] = _float_list(value, key)
        elif key in ("snr_start", "snr_stop", "snr_step"):
            try:
                grid_parts[key] = float(value)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {value!r}") from None
        elif key == "record_timing":
            kwargs[key] = _parse_bool(value, key)
        else:
            raise ConfigError(f"{key}: unknown configuration key")
    if grid_parts:
        missing = {"snr_start", "snr_stop", "snr_step"} - set(grid_parts)
        if missing:
            raise ConfigError(f"{sorted(missing)[0]}: required together with the other snr_* keys")
        kwargs["snr_grid_db"] = snr_range(grid_parts["snr_start"], grid_parts["snr_stop"], grid_parts["snr_step"])
    names = kwargs.get("detectors", ExperimentConfig.detectors)
    names = [d.name if isinstance(d, DetectorSpec) else d for d in names]
    for det in options:
        if det not in names:
            raise ConfigError(f"{det}: options given for a detector that is not enabled")
    kwargs["detectors"] = tuple(DetectorSpec(d, options.get(d, {})) for d in names)
    return ExperimentConfig(**kwargs)


def parse_config_text(text):
    """Parse the flat ``key = value`` format into a mapping (no validation)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            values = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    values.update(overrides or {})
    return config_from_mapping(values)


@dataclass(frozen=True)
class BerRecord:
    detector: str
    modulation: str
    rho: float
    snr_db: float
    trials: int
    total_bits: int
    bit_errors: int
    acceptance_rate: float | None = None
    seconds_per_trial: float | None = None

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.total_bits:
            raise ValueError("bit_errors must lie in [0, total_bits]")

    @property
    def ber(self):
        return self.bit_errors / self.total_bits if self.total_bits else 0.0

    def confidence_interval(self, level=0.95):
        return binomial_ci(self.bit_errors, self.total_bits, level)


def binomial_ci(errors, total, level=0.95):
    """Exact (Clopper-Pearson) interval for a binomial proportion."""
    ci = binomtest(int(errors), int(total)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def realize_trial(cfg, snr_index, trial_index, c=None):
    """Draw the channel, bits and received vector shared by all detectors in a trial."""
    c = c or build_constellation(cfg.modulation)
    key = (cfg.master_seed, snr_index, trial_index)
    h = draw_rayleigh_channel(cfg.m, cfg.n, np.random.default_rng(substream(*key, ROLE_CHANNEL)))
    if cfg.rho > 0:
        h = apply_kronecker_correlation(h, cfg.rho)
    bits = random_bits(2 * cfg.n * c.bits_per_real_dim, np.random.default_rng(substream(*key, ROLE_BITS)))
    u = modulate_bits(bits, c, 2 * cfg.n)
    sigma_w = noise_sigma_from_snr(cfg.snr_grid_db[snr_index], cfg.n, cfg.snr_convention)
    y = simulate_received(h, u[: cfg.n] + 1j * u[cfg.n :], sigma_w, np.random.default_rng(substream(*key, ROLE_NOISE)))
    return bits, complex_to_real(h, y, sigma_w)


def system_digest(sys):
    h = hashlib.sha256()
    for arr in (sys.h_real, sys.y_real, np.float64(sys.sigma_real)):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def _run_block(cfg, snr_index, trial_indices):
    """Run every detector on each listed trial; returns per-trial outcomes."""
    c = build_constellation(cfg.modulation)
    detectors = [(d, d.build(cfg.modulation)) for d in cfg.detectors]
    rows = []
    for t in trial_indices:
        bits, sys = realize_trial(cfg, snr_index, t, c)
        digest = system_digest(sys)
        per_det = []
        for spec, detect in detectors:
            t0 = time.perf_counter()
            res = detect(sys, c, substream(cfg.master_seed, snr_index, t, spec.role))
            elapsed = time.perf_counter() - t0
            if system_digest(sys) != digest:
                raise RuntimeError(f"detector {spec.name} modified its input")
            per_det.append(
                {
                    "detector": spec.name,
                    "bit_errors": count_bit_errors(bits, res.bits),
                    "acceptance_rate": res.acceptance_rate,
                    "seconds": elapsed,
                    "best_log_likelihood": res.best_log_likelihood,
                    "n_candidates": res.diagnostics.get("n_candidates"),
                }
            )
        rows.append({"snr_index": snr_index, "trial": t, "digest": digest, "detectors": per_det})
    return rows


def _blocks(cfg, block_size):
    for s in range(len(cfg.snr_grid_db)):
        for start in range(0, cfg.trials, block_size):
            yield s, range(start, min(start + block_size, cfg.trials))


def _unpack_block(args):
    return _run_block(*args)


def _warm_up(cfg):
    # compile the JIT kernels once in the parent so forked workers inherit them
    small = replace(cfg, n=1, m=1, trials=1, snr_grid_db=(10.0,), out=None, trace=None, threads=1)
    _run_block(small, 0, range(1))


def iter_trials(cfg, block_size=None):
    """Yield per-trial outcomes in (snr, trial) order, using ``cfg.threads`` processes."""
    block_size = block_size or max(1, min(50, cfg.trials // (4 * cfg.threads) or 1))
    jobs = [(cfg, s, trials) for s, trials in _blocks(cfg, block_size)]
    if cfg.threads == 1:
        for job in jobs:
            yield from _run_block(*job)
        return
    _warm_up(cfg)
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        for rows in pool.map(_unpack_block, jobs):
            yield from rows


def run_experiment(cfg, progress=None):
    """Run the sweep and return one :class:`BerRecord` per (detector, SNR).

    Parameters
    ----------
    cfg : ExperimentConfig
    progress : callable, optional
        Called with each per-trial outcome dict as it completes.
    """
    n_det = len(cfg.detectors)
    n_snr = len(cfg.snr_grid_db)
    errors = np.zeros((n_det, n_snr), dtype=np.int64)
    accept = [[[] for _ in range(n_snr)] for _ in range(n_det)]
    seconds = [[[] for _ in range(n_snr)] for _ in range(n_det)]
    trace = open(cfg.trace, "w", encoding="utf-8") if cfg.trace else None
    try:
        for row in iter_trials(cfg):
            s = row["snr_index"]
            for k, out in enumerate(row["detectors"]):
                errors[k, s] += out["bit_errors"]
                if out["acceptance_rate"] is not None:
                    accept[k][s].append(out["acceptance_rate"])
                seconds[k][s].append(out["seconds"])
            if trace:
                trace.write(json.dumps(_trace_entry(cfg, row), sort_keys=True) + "\n")
            if progress:
                progress(row)
    finally:
        if trace:
            trace.close()
    bits_per_trial = 2 * cfg.n * build_constellation(cfg.modulation).bits_per_real_dim
    records = []
    for k, spec in enumerate(cfg.detectors):
        for s, snr in enumerate(cfg.snr_grid_db):
            records.append(
                BerRecord(
                    detector=spec.name,
                    modulation=cfg.modulation,
                    rho=float(cfg.rho),
                    snr_db=snr,
                    trials=cfg.trials,
                    total_bits=cfg.trials * bits_per_trial,
                    bit_errors=int(errors[k, s]),
                    acceptance_rate=math.fsum(accept[k][s]) / len(accept[k][s]) if accept[k][s] else None,
                    seconds_per_trial=math.fsum(seconds[k][s]) / cfg.trials if cfg.record_timing else None,
                )
            )
    if cfg.out:
        write_csv(records, cfg.out)
    return records


def _trace_entry(cfg, row):
    entry = {
        "snr_db": cfg.snr_grid_db[row["snr_index"]],
        "trial": row["trial"],
        "input_digest": row["digest"],
        "detectors": [],
    }
    for out in row["detectors"]:
        out = dict(out)
        if not cfg.record_timing:
            out.pop("seconds")
        entry["detectors"].append(out)
    return entry


def _fmt(value):
    return "" if value is None else f"{value:.6g}"


def format_csv(records):
    """CSV text for ``records``, sorted by ``(detector, snr_db)``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: (r.detector, r.snr_db)):
        writer.writerow(
            [
                r.detector,
                r.modulation,
                repr(float(r.rho)),
                repr(float(r.snr_db)),
                r.trials,
                r.total_bits,
                r.bit_errors,
                _fmt(r.ber),
                _fmt(r.acceptance_rate),
                _fmt(r.seconds_per_trial),
            ]
        )
    return buf.getvalue()


def write_csv(records, path):
    """Write :func:`format_csv` output to ``path``."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(format_csv(records))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from None


def read_csv(path):
    """Load a results file written by :func:`write_csv`."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            out.append(
                BerRecord(
                    detector=row["detector"],
                    modulation=row["modulation"],
                    rho=float(row["rho"]),
                    snr_db=float(row["snr_db"]),
                    trials=int(row["trials"]),
                    total_bits=int(row["total_bits"]),
                    bit_errors=int(row["bit_errors"]),
                    acceptance_rate=float(row["acceptance_rate"]) if row["acceptance_rate"] else None,
                    seconds_per_trial=float(row["seconds_per_trial"]) if row["seconds_per_trial"] else None,
                )
            )
    return out


def complexity_counts(cfg):
    """Dominant operation counts per detector for one detection.

    Returns ``{detector: {"term": str, "count": int | None, "feasible": bool}}``.
    """
    c = build_constellation(cfg.modulation)
    n_real, m_real = 2 * cfg.n, 2 * cfg.m
    out = {}
    for spec in cfg.detectors:
        if spec.kind == "hmc":
            lf = spec.options.get("leapfrog_steps", 10)
            steps = spec.options.get("steps_per_chain", n_real)
            chains = spec.options.get("n_chains", max(1, TOTAL_STEP_BUDGET // n_real))
            total = chains * steps
            out[spec.name] = {
                "term": f"{lf}*{total}*{n_real}^2 multiply-adds",
                "count": lf * total * n_real**2,
                "feasible": True,
                "markov_steps": total,
            }
        elif spec.kind == "mgs":
            mgs = MgsConfig(**spec.options)
            updates = mgs.restarts * mgs.steps_per_restart
            out[spec.name] = {
                "term": f"{mgs.restarts}*{mgs.steps_per_restart} coordinate updates x {c.q}*{m_real} multiply-adds",
                "count": updates * c.q * m_real,
                "feasible": True,
                "coordinate_updates": updates,
            }
        elif spec.kind == "mmse":
            out[spec.name] = {"term": f"{n_real}^3 (linear solve)", "count": n_real**3, "feasible": True}
        else:
            cands = ml_candidate_count(c, n_real)
            ok = cands <= ML_MAX_CANDIDATES
            out[spec.name] = {
                "term": f"{c.q}^{n_real} candidates x {m_real}*{n_real}",
                "count": cands * m_real * n_real if ok else None,
                "candidates": cands,
                "feasible": ok,
            }
    return out


def estimate_complexity_report(cfg, measure=False, seed=0):
    """Human-readable operation-count summary, optionally with one timed detection each."""
    counts = complexity_counts(cfg)
    lines = [f"complexity for N={cfg.n}, M={cfg.m}, {cfg.modulation}"]
    timings = {}
    if measure:
        c = build_constellation(cfg.modulation)
        probe = replace(cfg, trials=1, snr_grid_db=(cfg.snr_grid_db[-1],), master_seed=seed, out=None, trace=None)
        _, sys = realize_trial(probe, 0, 0, c)
        for spec in cfg.detectors:
            if counts[spec.name]["feasible"]:
                detect = spec.build(cfg.modulation)
                t0 = time.perf_counter()
                detect(sys, c, substream(seed, 0, 0, spec.role))
                timings[spec.name] = time.perf_counter() - t0
    for name, info in counts.items():
        if info["feasible"]:
            line = f"  {name:<11} {info['term']} = {info['count']:.3e}"
        else:
            line = f"  {name:<11} {info['term']}: infeasible ({info['candidates']:.3e} candidates exceeds guard)"
        if name in timings:
            line += f"  [measured {timings[name] * 1e3:.1f} ms]"
        lines.append(line)
    return "\n".join(lines)


def default_threads():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
