"""Experiment orchestration: configs, seeding, multi-chain runs, analysis.

Configurations are flat INI sections with typed keys.  Runs are fully
deterministic functions of (config, master_seed): every chain draws its
generator from a documented SeedSequence spawn key, chains may execute
serially or in a process pool with identical results, and the single-threaded
writer emits RFC-4180 CSV plus a flat key-value manifest sufficient to
reproduce every output byte.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .disk_samplers import (DiskChainState, ecmc_hard_disk_run, hard_disk_metropolis_step,
                            jaster_step, new_disk_event_chain)
from .dynamics import PhaseState
from .exact import CRITICAL_COUPLING
from .lattice import (ISING, POTTS, XY, LatticeSpec, lattice_energy, magnetic_density,
                      ordered_config, random_config)
from .lattice_samplers import (LatticeChainState, ecmc_xy_run, glauber_sweeps,
                               metropolis_sweeps, new_xy_event_chain, swendsen_wang_step,
                               wolff_step)
from .md import md_run, random_velocities
from .observables import ObservableSeries, batch_mean_error, integrated_autocorrelation_time, specific_heat_estimate
from .particles import (HardDisk, ParticleSpec, hexagonal_config, torus_for_density,
                        write_particle_snapshot)

LATTICE_SAMPLERS = ("metropolis", "glauber", "swendsen_wang", "wolff", "ecmc_xy")
DISK_SAMPLERS = ("hd_metropolis", "jaster", "md", "ecmc_hd")

#: Approximate inverse critical coupling of the 2D XY model, used only to
#: pick ordered-vs-disordered starting states.
XY_TRANSITION_COUPLING = 1.13


class ConfigError(ValueError):
    """Carries every validation problem found in a configuration."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class ExperimentConfig:
    model: dict
    sampler: dict
    schedule: dict
    sweep: dict | None
    output: dict
    raw_text: str

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()[:16]

    def grid(self) -> list[float | None]:
        if self.sweep is None:
            return [None]
        return list(self.sweep["values"])

    @property
    def n_runs(self) -> int:
        return len(self.grid())


_MODEL_KEYS = {
    "kind": str, "dims": str, "beta": float, "coupling": float, "field": float,
    "q": int, "n": int, "sigma": float, "density": float,
}
_SAMPLER_KEYS = {
    "kind": str, "step_size": float, "systematic": bool, "max_attempts": int,
    "refresh": str, "refresh_parameter": float, "chain_length": float,
}
_SCHEDULE_KEYS = {
    "burn_in": int, "samples": int, "stride": int, "chains": int,
    "master_seed": int, "init": str,
}
_SWEEP_KEYS = {"parameter": str, "values": str}
_OUTPUT_KEYS = {"directory": str, "snapshots": bool}


def _parse_section(parser, name, schema, problems, required=()):
    out = {}
    if not parser.has_section(name):
        if required:
            problems.append(f"missing section [{name}]")
        return out
    for key, raw in parser.items(name):
        if key not in schema:
            problems.append(f"{name}.{key}: unknown key")
            continue
        kind = schema[key]
        try:
            if kind is bool:
                out[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                out[key] = kind(raw)
        except ValueError:
            problems.append(f"{name}.{key}: cannot parse {raw!r} as {kind.__name__}")
    for key in required:
        if key not in out:
            problems.append(f"{name}.{key}: required key missing")
    return out


def _parse_values(text: str, problems) -> list[float]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            problems.append(f"sweep.values: expected start:stop:count, got {text!r}")
            return []
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            problems.append(f"sweep.values: cannot parse {text!r}")
            return []
        if count < 2:
            problems.append("sweep.values: count must be at least 2")
            return []
        return list(np.linspace(start, stop, count))
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        problems.append(f"sweep.values: cannot parse {text!r}")
        return []


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat INI experiment configuration.

    Raises ConfigError listing every problem found, not only the first.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    problems: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc

    model = _parse_section(parser, "model", _MODEL_KEYS, problems, required=("kind",))
    sampler = _parse_section(parser, "sampler", _SAMPLER_KEYS, problems, required=("kind",))
    schedule = _parse_section(parser, "schedule", _SCHEDULE_KEYS, problems,
                              required=("master_seed",))
    output = _parse_section(parser, "output", _OUTPUT_KEYS, problems, required=("directory",))
    sweep = None
    if parser.has_section("sweep"):
        sweep_raw = _parse_section(parser, "sweep", _SWEEP_KEYS, problems,
                                   required=("parameter", "values"))
        if "values" in sweep_raw:
            values = _parse_values(sweep_raw["values"], problems)
            sweep = {"parameter": sweep_raw.get("parameter", "beta"), "values": values}
            if sweep["parameter"] not in ("beta", "density"):
                problems.append(f"sweep.parameter: must be beta or density, "
                                f"got {sweep['parameter']!r}")

    schedule.setdefault("burn_in", 0)
    schedule.setdefault("samples", 1000)
    schedule.setdefault("stride", 1)
    schedule.setdefault("chains", 1)
    schedule.setdefault("init", "auto")
    sampler.setdefault("step_size", 1.0)
    sampler.setdefault("systematic", False)
    sampler.setdefault("max_attempts", 16)
    sampler.setdefault("refresh", "uniform")
    sampler.setdefault("refresh_parameter", 1.0)
    output.setdefault("snapshots", False)

    kind = model.get("kind")
    if kind in (ISING, POTTS, XY):
        if "dims" not in model:
            problems.append("model.dims: required for lattice models")
        else:
            try:
                model["dims"] = tuple(int(v) for v in model["dims"].split("x"))
            except ValueError:
                problems.append(f"model.dims: cannot parse {model['dims']!r}")
        if model.get("beta", 1.0) <= 0:
            problems.append("model.beta: must be positive")
        model.setdefault("beta", 1.0)
        model.setdefault("coupling", 1.0)
        model.setdefault("field", 0.0)
        model.setdefault("q", 2)
    elif kind == "hard_disk":
        for key in ("n", "sigma", "density"):
            if key not in model:
                problems.append(f"model.{key}: required for hard disks")
        if model.get("density", 0.5) >= 0.9069:
            problems.append("model.density: beyond close packing")
    elif kind is not None:
        problems.append(f"model.kind: unknown model {kind!r}")

    s_kind = sampler.get("kind")
    if s_kind is not None and s_kind not in LATTICE_SAMPLERS + DISK_SAMPLERS:
        problems.append(f"sampler.kind: unknown sampler {s_kind!r}")
    if kind in (ISING, POTTS, XY) and s_kind in DISK_SAMPLERS:
        problems.append(f"sampler.kind: {s_kind} does not run on lattice models")
    if kind == "hard_disk" and s_kind in LATTICE_SAMPLERS:
        problems.append(f"sampler.kind: {s_kind} does not run on hard disks")
    if schedule.get("chains", 1) < 1:
        problems.append("schedule.chains: must be at least 1")
    if schedule.get("samples", 1) < 1:
        problems.append("schedule.samples: must be at least 1")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(model, sampler, schedule, sweep, output, text)


def seed_split(master_seed: int, run_index: int, chain_index: int) -> np.random.SeedSequence:
    """Chain seed: SeedSequence(master) spawned at key (run_index, chain_index).

    The mapping is injective and platform-independent; the manifest records
    the derived 128-bit state words.
    """
    return np.random.SeedSequence(master_seed, spawn_key=(run_index, chain_index))


def seed_words(seq: np.random.SeedSequence) -> str:
    return "-".join(f"{w:08x}" for w in seq.generate_state(4))


# ---------------------------------------------------------------------------
# Chain execution
# ---------------------------------------------------------------------------

def _lattice_spec_for(config: ExperimentConfig, param: float | None) -> LatticeSpec:
    m = config.model
    beta = m["beta"]
    if param is not None and config.sweep["parameter"] == "beta":
        beta = param
    return LatticeSpec(dims=m["dims"], model=m["kind"], beta=beta,
                       coupling=m["coupling"], field=m["field"], q=m["q"])


def _disk_spec_for(config: ExperimentConfig, param: float | None) -> ParticleSpec:
    m = config.model
    density = m["density"]
    if param is not None and config.sweep["parameter"] == "density":
        density = param
    torus = torus_for_density(m["n"], m["sigma"], density)
    return ParticleSpec(torus=torus, n=m["n"], potential=HardDisk(m["sigma"]))


def _initial_lattice(spec: LatticeSpec, init: str, rng) -> np.ndarray:
    if init == "ordered":
        return ordered_config(spec)
    if init == "disordered":
        return random_config(spec, rng)
    # auto: ordered in the low-temperature phase, disordered otherwise
    if spec.model == ISING:
        ordered = spec.beta * spec.coupling > CRITICAL_COUPLING
    elif spec.model == XY:
        ordered = spec.beta * spec.coupling > XY_TRANSITION_COUPLING
    else:
        ordered = False
    return ordered_config(spec) if ordered else random_config(spec, rng)


def run_lattice_chain(config: ExperimentConfig, run_index: int, param, chain_index: int):
    """Rows (time, energy, m [, m_y] [, cluster_size]) for one lattice chain."""
    spec = _lattice_spec_for(config, param)
    rng = np.random.default_rng(seed_split(config.schedule["master_seed"], run_index, chain_index))
    state = LatticeChainState(_initial_lattice(spec, config.schedule["init"], rng), rng)
    s_kind = config.sampler["kind"]
    stride = config.schedule["stride"]
    ec = new_xy_event_chain(spec, rng, config.sampler.get("chain_length")) \
        if s_kind == "ecmc_xy" else None
    cluster_size = None

    def advance():
        nonlocal cluster_size
        if s_kind == "metropolis":
            metropolis_sweeps(state, spec, stride, step_angle=config.sampler["step_size"],
                              systematic=config.sampler["systematic"])
        elif s_kind == "glauber":
            glauber_sweeps(state, spec, stride, systematic=config.sampler["systematic"])
        elif s_kind == "swendsen_wang":
            for _ in range(stride):
                swendsen_wang_step(state, spec)
        elif s_kind == "wolff":
            for _ in range(stride):
                cluster_size = wolff_step(state, spec)
        else:
            ecmc_xy_run(state, ec, spec, duration=stride * spec.n_sites)

    rows = []
    total = config.schedule["burn_in"] + config.schedule["samples"]
    for k in range(total):
        advance()
        if k < config.schedule["burn_in"]:
            continue
        row = [state.time, lattice_energy(state.spins, spec)]
        m = magnetic_density(state.spins, spec)
        row.extend(m if spec.model == XY else [m])
        if cluster_size is not None:
            row.append(cluster_size)
        rows.append(row)
    header = ["time", "energy", "m"]
    if spec.model == XY:
        header.append("m_y")
    if cluster_size is not None:
        header.append("cluster_size")
    unit = {"metropolis": "metropolis_sweep", "glauber": "metropolis_sweep",
            "swendsen_wang": "wolff_step", "wolff": "wolff_step",
            "ecmc_xy": "ecmc_event_time"}[s_kind]
    return header, rows, unit, spec.n_sites


def run_disk_chain(config: ExperimentConfig, run_index: int, param, chain_index: int,
                   snapshot_dir: str | None = None):
    """Rows (time, energy, min_distance) for one hard-disk chain."""
    spec = _disk_spec_for(config, param)
    rng = np.random.default_rng(seed_split(config.schedule["master_seed"], run_index, chain_index))
    positions = hexagonal_config(spec.n, spec.torus)
    s_kind = config.sampler["kind"]
    stride = config.schedule["stride"]
    sigma = spec.potential.sigma
    rows = []
    total = config.schedule["burn_in"] + config.schedule["samples"]

    def min_distance(pos):
        from .torus import pairwise_min_sep
        d = np.linalg.norm(pairwise_min_sep(pos, spec.torus), axis=-1)
        iu = np.triu_indices(spec.n, k=1)
        return float(d[iu].min()) if spec.n > 1 else math.inf

    if s_kind == "md":
        state = PhaseState(positions, random_velocities(spec.n, spec.torus.dim, rng))
        events = []
        for k in range(total):
            log = md_run(state, spec, target_collisions=10**9, max_time=float(stride))
            events.extend(log.events)
            if k >= config.schedule["burn_in"]:
                rows.append([state.time, 0.0, min_distance(state.positions)])
                _maybe_snapshot(snapshot_dir, config, state.positions, spec, k)
        if snapshot_dir is not None and config.output["snapshots"]:
            write_event_log(events, Path(snapshot_dir) / "events.csv")
        return ["time", "energy", "min_distance"], rows, "md_time", spec.n

    state = DiskChainState(positions, rng)
    chain = new_disk_event_chain(spec, rng, config.sampler["refresh"],
                                 config.sampler["refresh_parameter"]) if s_kind == "ecmc_hd" else None
    for k in range(total):
        if s_kind == "hd_metropolis":
            for _ in range(stride * spec.n):
                hard_disk_metropolis_step(state, spec, config.sampler["step_size"])
            state.time += stride
        elif s_kind == "jaster":
            for _ in range(stride * spec.n):
                jaster_step(state, spec, config.sampler["step_size"],
                            config.sampler["max_attempts"])
            state.time += stride
        else:
            ecmc_hard_disk_run(state, chain, spec, duration=stride * spec.n * sigma)
        if k >= config.schedule["burn_in"]:
            rows.append([state.time, 0.0, min_distance(state.positions)])
            _maybe_snapshot(snapshot_dir, config, state.positions, spec, k)
    unit = "ecmc_event_time" if s_kind == "ecmc_hd" else "metropolis_sweep"
    return ["time", "energy", "min_distance"], rows, unit, spec.n


def _maybe_snapshot(snapshot_dir, config, positions, spec, index):
    if snapshot_dir is None or not config.output["snapshots"]:
        return
    path = Path(snapshot_dir) / f"snap{index:06d}.txt"
    write_particle_snapshot(positions, spec, path)


def _chain_job(args):
    """One chain, with failures captured so sibling chains are unaffected."""
    config, run_index, param, chain_index, snapshot_dir = args
    try:
        if config.model["kind"] == "hard_disk":
            return run_disk_chain(config, run_index, param, chain_index, snapshot_dir)
        return run_lattice_chain(config, run_index, param, chain_index)
    except Exception as exc:  # recorded in the manifest, run continues
        return ("failed", f"{type(exc).__name__}: {exc}")


def write_event_log(events, path) -> None:
    """Event rows (time, kind, i, j, diagnostic) as RFC-4180 CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "kind", "i", "j", "diagnostic"])
        for time_value, kind, i, j, diag in events:
            writer.writerow([_format_csv_value(float(time_value)), kind, i, j,
                             _format_csv_value(float(diag))])


def _format_csv_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> Path:
    """Execute every (grid point, chain) job and write CSVs plus the manifest.

    Outputs are a pure function of (config, master_seed): the same bytes
    appear whether chains run serially or in a pool.
    """
    out_dir = Path(config.output["directory"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = int(os.environ.get("STATMC_WORKERS", "1"))

    jobs = []
    for run_index, param in enumerate(config.grid()):
        for chain_index in range(config.schedule["chains"]):
            snap = None
            if config.output["snapshots"] and config.model["kind"] == "hard_disk":
                snap = out_dir / f"run{run_index:03d}_chain{chain_index:02d}_snapshots"
                Path(snap).mkdir(exist_ok=True)
                snap = str(snap)
            jobs.append((config, run_index, param, chain_index, snap))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(job) for job in jobs]

    manifest = [
        ("version", __version__),
        ("config_hash", config.config_hash()),
        ("master_seed", config.schedule["master_seed"]),
        ("n_runs", config.n_runs),
        ("chains", config.schedule["chains"]),
        ("model_kind", config.model["kind"]),
        ("sampler_kind", config.sampler["kind"]),
        ("burn_in", config.schedule["burn_in"]),
        ("samples", config.schedule["samples"]),
        ("stride", config.schedule["stride"]),
        ("sweep_parameter", config.sweep["parameter"] if config.sweep else ""),
    ]
    if config.model["kind"] in (ISING, POTTS, XY):
        manifest.append(("model_beta", repr(float(config.model["beta"]))))
        manifest.append(("model_coupling", repr(float(config.model["coupling"]))))
        manifest.append(("n_sites", int(np.prod(config.model["dims"]))))

    for (cfg, run_index, param, chain_index, _), result in zip(jobs, results):
        tag = f"run{run_index:03d}_chain{chain_index:02d}"
        seq = seed_split(config.schedule["master_seed"], run_index, chain_index)
        manifest.append((f"seed_{tag}", seed_words(seq)))
        manifest.append((f"param_run{run_index:03d}", "" if param is None else repr(float(param))))
        if result[0] == "failed":
            manifest.append((f"status_{tag}", f"failed: {result[1]}"))
            continue
        header, rows, unit, size = result
        with open(out_dir / f"{tag}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format_csv_value(v) for v in row])
        manifest.append((f"unit_run{run_index:03d}", unit))
        manifest.append((f"rows_{tag}", len(rows)))
        manifest.append((f"status_{tag}", "ok"))

    with open(out_dir / "manifest.txt", "w") as fh:
        for key, value in manifest:
            fh.write(f"{key} = {value}\n")
    # The exact configuration reproduces the run bit for bit.
    (out_dir / "config.ini").write_text(config.raw_text)
    return out_dir / "manifest.txt"


# ---------------------------------------------------------------------------
# Analysis over run directories
# ---------------------------------------------------------------------------

OBSERVABLES = ("mean_energy", "mean_abs_m", "mean_m_norm", "specific_heat",
               "specific_heat_per_site", "iat_abs_m")


def read_manifest(path: Path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if " = " in line:
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def _read_series(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(float(v))
    return {h: np.asarray(v) for h, v in cols.items()}


def analyze_directory(directory, observable: str) -> list[dict]:
    """Per-run estimates of one observable with between-chain standard errors."""
    if observable not in OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}; pick one of {OBSERVABLES}")
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.txt")
    n_runs = int(manifest["n_runs"])
    n_chains = int(manifest["chains"])
    n_sites = int(manifest.get("n_sites", "1"))
    base_beta = float(manifest.get("model_beta", "1.0"))
    sweep_param = manifest.get("sweep_parameter", "")

    results = []
    for run_index in range(n_runs):
        unit = manifest[f"unit_run{run_index:03d}"]
        param_txt = manifest.get(f"param_run{run_index:03d}", "")
        param = float(param_txt) if param_txt else None
        beta = param if (param is not None and sweep_param == "beta") else base_beta
        per_chain = []
        for chain_index in range(n_chains):
            status = manifest.get(f"status_run{run_index:03d}_chain{chain_index:02d}", "ok")
            if status != "ok":
                continue
            cols = _read_series(directory / f"run{run_index:03d}_chain{chain_index:02d}.csv")
            abs_m = (np.hypot(cols["m"], cols["m_y"]) if "m_y" in cols
                     else np.abs(cols.get("m", np.zeros(1))))
            if observable == "mean_energy":
                per_chain.append(float(cols["energy"].mean()))
            elif observable == "mean_abs_m":
                per_chain.append(float(abs_m.mean()))
            elif observable == "mean_m_norm":
                m = np.stack([cols["m"], cols["m_y"]], axis=1) if "m_y" in cols \
                    else cols["m"][:, None]
                per_chain.append(float(np.linalg.norm(m.mean(axis=0))))
            elif observable in ("specific_heat", "specific_heat_per_site"):
                series = ObservableSeries(cols["energy"], unit)
                heat = specific_heat_estimate(series, beta)
                per_chain.append(heat / n_sites if observable.endswith("per_site") else heat)
            else:
                per_chain.append(integrated_autocorrelation_time(abs_m))
        if not per_chain:
            raise ValueError(f"run {run_index}: every chain failed; nothing to estimate")
        value, err = batch_mean_error(per_chain, n_batches=len(per_chain))
        row = {
            "run": run_index,
            "param_name": sweep_param or "beta",
            "param_value": param if param is not None else base_beta,
            "observable": observable,
            "value": value,
            "stderr": err,
            "time_unit": unit,
            "n_chains": len(per_chain),
        }
        if manifest.get("model_kind") == ISING:
            coupling = float(manifest.get("model_coupling", "1.0"))
            row["beta_over_beta_c"] = (CRITICAL_COUPLING / coupling) / beta
        results.append(row)
    return results


def write_analysis_csv(results: list[dict], path) -> None:
    fields = ["run", "param_name", "param_value", "observable", "value",
              "stderr", "time_unit", "n_chains"]
    if results and "beta_over_beta_c" in results[0]:
        fields.append("beta_over_beta_c")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in results:
            writer.writerow({k: (_format_csv_value(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
