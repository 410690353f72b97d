"""Monte-Carlo sweeps behind the NMSE, BER and sum-rate studies.

Run r uses seed ``experiment.seed + r`` for its channel draw; the optimizer
seed also carries the sweep point, and every scheme at a given point starts
from the same phases. Runs fan out over a process pool but results are
assembled in (sweep value, seed, scheme) order, so tables are byte-identical
whatever the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import textio
from .allocation import check_feasible
from .channel import realize_channel
from .config import ExperimentConfig
from .errors import ConfigError, InfeasibleError
from .optimizer import FitState, Problem, optimize
from .propagation import SimGeometry, build_stack

log = logging.getLogger(__name__)

COLUMNS = ("scheme", "sweep_key", "sweep_value", "seed", "metric_name", "metric_value", "config_hash")

NMSE_SCHEMES = ("joint", "greedy", "random")
BER_SCHEMES = ("joint", "sim-sdma", "sim-ofdma", "digital-zf")
SUMRATE_SCHEMES = ("joint", "digital-zf")

_ZSTEP = {"greedy": "greedy", "random": "random", "sim-sdma": "sdma", "sim-ofdma": "ofdma"}


@dataclass
class ResultTable:
    name: str
    config: ExperimentConfig
    rows: list = field(default_factory=list)

    def add(self, scheme, key, value, seed, metric, metric_value):
        self.rows.append((scheme, key, value, seed, metric, metric_value))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        h = self.config.config_hash()
        for scheme, key, value, seed, metric, mv in self.rows:
            w.writerow([scheme, key, _cell(value), seed, metric, _cell(mv), h])
        return buf.getvalue()

    def metadata(self) -> str:
        meta = {"sweep": self.name, "config_hash": self.config.config_hash(),
                "columns": list(COLUMNS), "config": self.config.to_flat()}
        return json.dumps(meta, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.csv"
        path.write_text(self.to_csv())
        (out / f"{self.name}.json").write_text(self.metadata())
        return path

    def values(self, scheme, metric, sweep_value=None) -> list:
        """Per-seed metric values (aggregate rows excluded)."""
        return [mv for s, _, v, seed, m, mv in self.rows
                if s == scheme and m == metric and isinstance(seed, int)
                and (sweep_value is None or v == sweep_value)]

    def mean(self, scheme, metric, sweep_value=None) -> float:
        return float(np.mean(self.values(scheme, metric, sweep_value)))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# --- shared plumbing --------------------------------------------------------

def _select(config: ExperimentConfig, allowed, default):
    chosen = config.experiment.schemes or default
    picked = tuple(s for s in chosen if s in allowed)
    if not picked:
        raise ConfigError(f"none of the schemes {list(chosen)} applies to this sweep (valid: {list(allowed)})")
    return picked


def _setup(config: ExperimentConfig, seed: int):
    ch = realize_channel(config.system, seed)
    stack = build_stack(SimGeometry.from_config(config.system), ch.frequencies)
    return ch, stack


def _scheme_problem(config, stack, G, scheme, K_c) -> Problem:
    opts = config.optimizer
    if scheme != "joint":
        opts = replace(opts, zstep=_ZSTEP[scheme])
    return Problem(stack, G, K_c, opts)


def fit_scheme(config, stack, G, scheme, K_c, seed) -> tuple[FitState, np.ndarray]:
    """Optimize one SIM scheme; returns the final state and its effective channels."""
    problem = _scheme_problem(config, stack, G, scheme, K_c)
    state = optimize(problem, seed)
    return state, problem.effective(state.theta)


def _ofdma_kc(config) -> int:
    s = config.system
    return -(-s.num_subcarriers // s.num_users)


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _seeds(config):
    e = config.experiment
    return [e.seed + r for r in range(e.runs)]


def _aggregate(table: ResultTable, metric: str, order):
    groups = {}
    for scheme, key, value, seed, m, mv in table.rows:
        if m == metric and isinstance(seed, int):
            groups.setdefault((value, scheme, key), []).append(mv)
    for (value, scheme, key) in sorted(groups, key=lambda g: (g[0], order.index(g[1]))):
        vals = np.array(groups[(value, scheme, key)], dtype=float)
        table.add(scheme, key, value, "all", f"{metric}_mean", float(np.mean(vals)))
        table.add(scheme, key, value, "all", f"{metric}_std", float(np.std(vals)))


# --- NMSE -------------------------------------------------------------------

def _nmse_job(args):
    config, seed, schemes, kcs = args
    ch, stack = _setup(config, seed)
    out = []
    for kc in kcs:
        for scheme in schemes:
            state, _ = fit_scheme(config, stack, ch.G, scheme, kc, [seed, kc])
            out.append((kc, seed, scheme, ev.nmse(state.gamma, state.Z)))
    return out


def run_nmse_sweep(config: ExperimentConfig) -> ResultTable:
    """Mean fitting NMSE of joint / greedy / random assignment versus K_c."""
    config.validate()
    s = config.system
    schemes = _select(config, NMSE_SCHEMES, NMSE_SCHEMES)
    table = ResultTable("nmse", config)
    kcs = []
    for kc in config.experiment.nmse_kc:
        try:
            check_feasible(s.num_users, s.num_subcarriers, kc)
            kcs.append(kc)
        except InfeasibleError as exc:
            log.warning("skipping K_c=%s: %s", kc, exc)
            for scheme in schemes:
                table.add(scheme, "K_c", kc, "", "infeasible", math.nan)
    jobs = [(config, seed, schemes, tuple(kcs)) for seed in _seeds(config)]
    results = [r for batch in _map(_nmse_job, jobs, config.experiment.threads) for r in batch]
    for kc, seed, scheme, value in sorted(results, key=lambda r: (r[0], r[1], schemes.index(r[2]))):
        table.add(scheme, "K_c", kc, seed, "nmse", value)
    _aggregate(table, "nmse", schemes)
    return table


# --- BER --------------------------------------------------------------------

def _ber_job(args):
    config, seed, schemes = args
    e, s = config.experiment, config.system
    ch, stack = _setup(config, seed)
    links = {}
    for scheme in schemes:
        if scheme == "digital-zf":
            H = ev.digital_zf_channels(ch.G)
            Z = np.ones((s.num_users, s.num_subcarriers), dtype=np.int8)
            links[scheme] = (H, ev.best_alpha(H), Z, 0.0)
            continue
        if scheme == "sim-sdma":
            kc, offset = s.num_subcarriers, 0.0
        elif scheme == "sim-ofdma":
            kc = _ofdma_kc(config)
            offset = ev.snr_offset_db(e.ber_kc, s.num_subcarriers, s.num_users)
        else:
            kc, offset = e.ber_kc, 0.0
        state, H = fit_scheme(config, stack, ch.G, scheme, kc, [seed, kc])
        links[scheme] = (H, state.alpha, state.Z, offset)
    out = []
    for pi, power in enumerate(e.ber_powers_dbm):
        for si, scheme in enumerate(schemes):
            H, alpha, Z, offset = links[scheme]
            budget = ev.LinkBudget.from_config(s, power, offset)
            rec = ev.evaluate_link(H, alpha, Z, budget, scheme=scheme, seed=[seed, pi, si],
                                   ber_trials=e.ber_symbols, waterfill_iterations=e.waterfill_iterations)
            out.append((float(power), seed, scheme, rec.ber))
    return out


def run_ber_sweep(config: ExperimentConfig) -> ResultTable:
    """Average BPSK BER versus total transmit power for the SIM schemes and digital ZF."""
    config.validate()
    schemes = _select(config, BER_SCHEMES, BER_SCHEMES)
    table = ResultTable("ber", config)
    jobs = [(config, seed, schemes) for seed in _seeds(config)]
    results = [r for batch in _map(_ber_job, jobs, config.experiment.threads) for r in batch]
    for power, seed, scheme, value in sorted(results, key=lambda r: (r[0], r[1], schemes.index(r[2]))):
        table.add(scheme, "power_dbm", power, seed, "ber", value)
    _aggregate(table, "ber", schemes)
    return table


# --- sum rate ---------------------------------------------------------------

def sumrate_kcs(config) -> tuple:
    kcs = config.experiment.sumrate_kc
    return tuple(kcs) if kcs else tuple(range(_ofdma_kc(config), config.system.num_subcarriers + 1))


def _sumrate_job(args):
    config, seed, schemes, kcs = args
    e, s = config.experiment, config.system
    ch, stack = _setup(config, seed)
    budget = ev.LinkBudget.from_config(s, e.sumrate_power_dbm)
    out = []
    zf = None
    if "digital-zf" in schemes:
        zf = ev.digital_zf_baseline(ch.G, budget, waterfill_iterations=e.waterfill_iterations).sum_rate
    for kc in kcs:
        for scheme in schemes:
            if scheme == "digital-zf":
                out.append((kc, seed, scheme, zf))
                continue
            state, H = fit_scheme(config, stack, ch.G, scheme, kc, [seed, kc])
            rec = ev.evaluate_link(H, state.alpha, state.Z, budget, scheme=scheme, seed=seed,
                                   waterfill_iterations=e.waterfill_iterations)
            out.append((kc, seed, scheme, rec.sum_rate))
    return out


def run_sumrate_sweep(config: ExperimentConfig) -> ResultTable:
    """Sum rate versus K_c at a fixed power, with the K_c-independent digital ZF reference."""
    config.validate()
    s = config.system
    schemes = _select(config, ("joint", "greedy", "random", "digital-zf"), SUMRATE_SCHEMES)
    kcs = sumrate_kcs(config)
    for kc in kcs:
        check_feasible(s.num_users, s.num_subcarriers, kc)
    table = ResultTable("sumrate", config)
    jobs = [(config, seed, schemes, kcs) for seed in _seeds(config)]
    results = [r for batch in _map(_sumrate_job, jobs, config.experiment.threads) for r in batch]
    for kc, seed, scheme, value in sorted(results, key=lambda r: (r[0], r[1], schemes.index(r[2]))):
        table.add(scheme, "K_c", kc, seed, "sum_rate", value)
    _aggregate(table, "sum_rate", schemes)
    return table


# --- single run -------------------------------------------------------------

@dataclass
class SingleResult:
    state: FitState
    record: ev.MetricsRecord
    heatmap_path: Path
    files: dict


def run_single(config: ExperimentConfig, out_dir=None) -> SingleResult:
    """One joint optimization at ``experiment.single_kc`` with trace, heatmap and dumps."""
    config.validate()
    e, s = config.experiment, config.system
    out = Path(out_dir if out_dir is not None else e.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = e.seed
    ch, stack = _setup(config, seed)
    problem = Problem(stack, ch.G, e.single_kc, config.optimizer)
    state = optimize(problem, [seed, e.single_kc])
    H = problem.effective(state.theta)
    h = config.config_hash()
    budget = ev.LinkBudget.from_config(s, e.sumrate_power_dbm)
    record = ev.evaluate_link(H, state.alpha, state.Z, budget, scheme="joint", seed=seed,
                              ber_trials=e.ber_symbols, waterfill_iterations=e.waterfill_iterations,
                              gamma=state.gamma, config_hash=h)
    files = {
        "heatmap": out / "single_heatmap.txt",
        "trace": out / "single_trace.csv",
        "channel": out / "single_channel.txt",
        "cascade": out / "single_cascade.txt",
        "assignment": out / "single_assignment.txt",
        "metrics": out / "single_metrics.json",
    }
    files["heatmap"].write_text(f"# config_hash {h}\n" + textio.dump_matrix(ev.heatmap(H, state.alpha, state.Z)))
    files["trace"].write_text(textio.dump_trace(state.log, h))
    files["channel"].write_text(f"# config_hash {h}\n" + textio.dump_complex(ch.G))
    files["cascade"].write_text(f"# config_hash {h}\n" + textio.dump_complex(H))
    files["assignment"].write_text(f"# config_hash {h}\n" + textio.dump_matrix(state.Z.Z))
    metrics = {"config_hash": h, "seed": seed, "K_c": e.single_kc, "alpha": state.alpha,
               "gamma": state.gamma, "nmse": record.nmse, "sum_rate": record.sum_rate,
               "ber": record.ber, "ber_per_user": [float(b) for b in record.ber_per_user],
               "power_dbm": e.sumrate_power_dbm, "config": config.to_flat()}
    files["metrics"].write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    return SingleResult(state, record, files["heatmap"], files)
