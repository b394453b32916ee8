"""Monte Carlo studies of the banded inverse estimator.

Four table runners: mean spectral loss of the plug-in banded inverse under
four long-memory data generating processes (table 1), the same losses
relative to a theoretical rate benchmark (table 2), losses of the detrended
variant under polynomial trends with the design known or chosen by subset
selection (table 3), and the relative loss movement under bandwidth
perturbation (table 4). Every replication draws from its own seed sequence,
so results are identical no matter how many worker processes run them.
"""

from __future__ import annotations

import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from .banding import _loss_estimate, select_k, sensitivity, true_inverse_dense
from .cholesky import build_estimated_inverse
from .errors import DegenerateDataError, LongmemError, ParameterError
from .farima import FarimaModel, _simulate_from_gamma, autocov
from .linops import DenseOp
from .regression import (
    REGRESSION_MODELS,
    build_detrended_inverse,
    detrend,
    model_select,
    polynomial_design,
    trend_signal,
)

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

# loss evaluations inside the tables use a looser power-iteration tolerance
# than the library default; see spectral_norm
LOSS_REL_TOL = 1e-6

_DGPS = ("dgp1", "dgp2", "dgp3", "dgp4")
_MAX_FAIL_FRACTION = 0.02


def op_rate(d: float, n: int) -> float:
    """Rate benchmark 0.05 n^-a (log n)^b with exponents switching at d = 0.225."""
    if not 0.0 < d < 0.5:
        raise ParameterError(f"need 0 < d < 0.5, got {d}")
    if n < 2:
        raise ParameterError(f"need n >= 2, got {n}")
    ln = math.log(n)
    if d <= 0.225:
        return 0.05 * n ** (-d / (4 + 2 * d)) * ln ** ((4 + d) / (4 + 2 * d))
    return (0.05 * n ** (-d * (1 - 2 * d) / (2 + 2 * d))
            * ln ** ((2 + d) / (2 + 2 * d)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and replication settings for one table run.

    dgp_n maps each process preset to its sample sizes (tables 1, 2, 4);
    model_n does the same for trend models (table 3). c_list holds the
    bandwidth scaling factors of table 4. Cells are visited in the stored
    order, d varying before n within each process.
    """

    table: int
    reps: int = 250
    seed: int = 42
    d_values: tuple = (0.25, 0.4)
    dgp_n: tuple = ()
    model_n: tuple = ()
    c_list: tuple = ()

    def __post_init__(self):
        if self.table not in (1, 2, 3, 4):
            raise ParameterError(f"table must be 1..4, got {self.table}")
        if self.reps < 2:
            raise ParameterError("need at least two replications")
        if not self.d_values:
            raise ParameterError("d grid is empty")
        for d in self.d_values:
            if not 0.0 < d < 0.5:
                raise ParameterError(f"need 0 < d < 0.5, got {d}")
        if self.table == 3:
            if not self.model_n:
                raise ParameterError("table 3 needs model_n")
            pairs = self.model_n
            for mid, _ in pairs:
                if mid not in REGRESSION_MODELS:
                    raise ParameterError(f"unknown trend model {mid}")
        else:
            if not self.dgp_n:
                raise ParameterError(f"table {self.table} needs dgp_n")
            pairs = self.dgp_n
            for name, _ in pairs:
                if name not in _DGPS:
                    raise ParameterError(f"unknown process preset {name!r}")
        for _, n_list in pairs:
            if not n_list:
                raise ParameterError("empty sample size list")
            for n in n_list:
                if n < 20:
                    raise ParameterError(f"need n >= 20, got {n}")
        if self.table == 4:
            if not self.c_list:
                raise ParameterError("table 4 needs c_list")
            for c in self.c_list:
                if c <= 0:
                    raise ParameterError("scaling factors must be positive")


def desk_config(table: int, seed: int = 42, reps: int = 250) -> ExperimentConfig:
    """Small grid sized for a workstation run of the given table."""
    if table in (1, 2):
        return ExperimentConfig(
            table=table, reps=reps, seed=seed, d_values=(0.25, 0.4),
            dgp_n=(("dgp1", (250, 500, 1000)), ("dgp2", (250, 500)),
                   ("dgp3", (250, 500)), ("dgp4", (250, 500))))
    if table == 3:
        return ExperimentConfig(
            table=3, reps=reps, seed=seed, d_values=(0.25,),
            model_n=((1, (250, 1000)), (3, (250, 1000))))
    if table == 4:
        return ExperimentConfig(
            table=4, reps=reps, seed=seed, d_values=(0.1, 0.25, 0.45),
            dgp_n=tuple((g, (1000,)) for g in _DGPS), c_list=(0.8, 1.2))
    raise ParameterError(f"table must be 1..4, got {table}")


def full_config(table: int, seed: int = 42, reps: int = 1000) -> ExperimentConfig:
    """Complete grid of the corresponding study; days of CPU, not for CI."""
    all_n = (250, 500, 1000, 2000, 4000)
    if table in (1, 2):
        return ExperimentConfig(
            table=table, reps=reps, seed=seed,
            d_values=(0.01, 0.1, 0.25, 0.4, 0.49),
            dgp_n=tuple((g, all_n) for g in _DGPS))
    if table == 3:
        return ExperimentConfig(
            table=3, reps=reps, seed=seed, d_values=(0.1, 0.25, 0.45),
            model_n=tuple((m, all_n) for m in (1, 2, 3)))
    if table == 4:
        return ExperimentConfig(
            table=4, reps=reps, seed=seed, d_values=(0.1, 0.25, 0.45),
            dgp_n=tuple((g, all_n) for g in _DGPS), c_list=(0.8, 1.2))
    raise ParameterError(f"table must be 1..4, got {table}")


def config_from_file(path: str, reps: int | None = None,
                     seed: int | None = None) -> ExperimentConfig:
    """Load a grid from a JSON or TOML file.

    Recognized keys: table (required), reps, seed, d_values, dgps (mapping
    preset name to a list of n), models (mapping model id to a list of n),
    c_list. The reps/seed arguments override the file when given.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        data = tomllib.loads(raw.decode())
    else:
        data = json.loads(raw)
    if not isinstance(data, dict) or "table" not in data:
        raise ParameterError(f"{path}: config must be a mapping with a 'table' key")
    kwargs = {"table": int(data["table"])}
    if "reps" in data:
        kwargs["reps"] = int(data["reps"])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "d_values" in data:
        kwargs["d_values"] = tuple(float(d) for d in data["d_values"])
    if "dgps" in data:
        kwargs["dgp_n"] = tuple((str(k), tuple(int(n) for n in v))
                                for k, v in data["dgps"].items())
    if "models" in data:
        kwargs["model_n"] = tuple((int(k), tuple(int(n) for n in v))
                                  for k, v in data["models"].items())
    if "c_list" in data:
        kwargs["c_list"] = tuple(float(c) for c in data["c_list"])
    if reps is not None:
        kwargs["reps"] = reps
    if seed is not None:
        kwargs["seed"] = seed
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class ExperimentRow:
    """One summarized cell: primary (value, se) plus table-specific extras."""

    table: int
    group: str
    d: float
    n: int
    value: float
    se: float
    reps_used: int
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TableResult:
    table: int
    config: ExperimentConfig
    rows: tuple
    failures: tuple = ()
    summary: dict | None = None


# The active cell is stashed in a module global right before the worker pool
# forks, so child processes inherit it by memory copy instead of pickling.
_CELL = None


def _cell_rep(r: int):
    return _CELL.rep(r)


def worker_count(reps: int) -> int:
    """Workers for one cell: LONGMEM_THREADS if set, else the CPU count."""
    raw = os.environ.get("LONGMEM_THREADS", "")
    if raw:
        try:
            w = int(raw)
        except ValueError:
            raise ParameterError(f"LONGMEM_THREADS must be an integer, got {raw!r}")
        if w < 1:
            raise ParameterError("LONGMEM_THREADS must be >= 1")
    else:
        w = os.cpu_count() or 1
    return min(w, reps)


def _map_reps(cell, reps: int) -> list:
    global _CELL
    workers = worker_count(reps)
    if workers > 1:
        try:
            ctx = multiprocessing.get_context("fork")
        except ValueError:
            workers = 1
    if workers == 1:
        return [cell.rep(r) for r in range(reps)]
    _CELL = cell
    try:
        with ctx.Pool(processes=workers) as pool:
            return pool.map(_cell_rep, range(reps))
    finally:
        _CELL = None


def _check_failures(fails: list, reps: int, where: str) -> None:
    if len(fails) > _MAX_FAIL_FRACTION * reps:
        raise DegenerateDataError(
            f"{len(fails)} of {reps} replications failed in {where}; "
            f"first failure: {fails[0]}")


def _summarize(values: np.ndarray):
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(len(values)))
    return mean, se


def _seed_head(cfg: ExperimentConfig, group_index: int, d: float, n: int) -> list:
    return [cfg.seed, cfg.table, group_index, round(d * 1e6), n]


class _LossCell:
    """Per-replication work of one (process, d, n) cell of tables 1 and 2."""

    def __init__(self, dgp: str, d: float, n: int, cfg: ExperimentConfig):
        model = FarimaModel.preset(dgp, d=d)
        self.gamma = autocov(model, n).values
        self.true_op = DenseOp(true_inverse_dense(self.gamma, n))
        self.n = n
        self.head = _seed_head(cfg, _DGPS.index(dgp) + 1, d, n)

    def rep(self, r: int):
        try:
            rng = np.random.default_rng(np.random.SeedSequence(self.head + [r]))
            u = _simulate_from_gamma(self.gamma, rng.standard_normal(self.n))
            k = select_k(u).chosen_k
            loss = _loss_estimate(build_estimated_inverse(u, k),
                                  self.true_op, LOSS_REL_TOL)
            return loss, None
        except LongmemError as exc:
            return math.nan, f"rep {r}: {exc}"


def run_l2_table(cfg: ExperimentConfig) -> TableResult:
    """Mean spectral loss per cell; table 2 adds the rate benchmark ratio."""
    if cfg.table not in (1, 2):
        raise ParameterError("run_l2_table handles tables 1 and 2")
    rows = []
    failures = []
    for dgp, n_list in cfg.dgp_n:
        for d in cfg.d_values:
            for n in n_list:
                cell = _LossCell(dgp, d, n, cfg)
                out = _map_reps(cell, cfg.reps)
                fails = [msg for _, msg in out if msg is not None]
                _check_failures(fails, cfg.reps, f"{dgp} d={d} n={n}")
                vals = np.array([v for v, msg in out if msg is None])
                mean, se = _summarize(vals)
                extras = {}
                if cfg.table == 2:
                    rate = op_rate(d, n)
                    extras = {"op_rate": rate, "ratio": mean / rate}
                rows.append(ExperimentRow(cfg.table, dgp, d, n, mean, se,
                                          len(vals), extras))
                failures.extend(f"{dgp} d={d} n={n}: {m}" for m in fails)
    return TableResult(cfg.table, cfg, tuple(rows), tuple(failures))


class _RegressionCell:
    """Per-replication work of one (model, d, n) cell of table 3.

    Errors come from the pure fractional process. The known-design pipeline
    detrends with the true regressors; the selected-design pipeline first
    runs best subset selection and reuses the known-design loss whenever the
    chosen exponents coincide with the truth.
    """

    def __init__(self, model_id: int, d: float, n: int, cfg: ExperimentConfig):
        self.n = n
        self.true_exps = tuple(REGRESSION_MODELS[model_id][0])
        self.signal = trend_signal(n, model_id)
        self.gamma = autocov(FarimaModel(d=d), n).values
        self.true_op = DenseOp(true_inverse_dense(self.gamma, n))
        self.design = polynomial_design(n, self.true_exps)
        self.head = _seed_head(cfg, model_id, d, n)

    def _pipeline_loss(self, y, design) -> float:
        resid = detrend(y, design).resid
        k = select_k(resid).chosen_k
        inv = build_detrended_inverse(y, design, k)
        return _loss_estimate(inv, self.true_op, LOSS_REL_TOL)

    def rep(self, r: int):
        try:
            rng = np.random.default_rng(np.random.SeedSequence(self.head + [r]))
            u = _simulate_from_gamma(self.gamma, rng.standard_normal(self.n))
            y = self.signal + u
            known = self._pipeline_loss(y, self.design)
            chosen = tuple(model_select(y, self.n).exponents)
            if chosen == self.true_exps:
                return known, known, True, None
            sel = self._pipeline_loss(y, polynomial_design(self.n, chosen))
            return known, sel, False, None
        except LongmemError as exc:
            return math.nan, math.nan, False, f"rep {r}: {exc}"


def run_regression_table(cfg: ExperimentConfig) -> TableResult:
    """Detrended losses with known and selected design, plus hit frequency."""
    if cfg.table != 3:
        raise ParameterError("run_regression_table handles table 3")
    rows = []
    failures = []
    for model_id, n_list in cfg.model_n:
        for d in cfg.d_values:
            for n in n_list:
                cell = _RegressionCell(model_id, d, n, cfg)
                out = _map_reps(cell, cfg.reps)
                fails = [msg for *_, msg in out if msg is not None]
                where = f"model{model_id} d={d} n={n}"
                _check_failures(fails, cfg.reps, where)
                ok = [(kn, sel, hit) for kn, sel, hit, msg in out if msg is None]
                k_mean, k_se = _summarize(np.array([kn for kn, _, _ in ok]))
                s_mean, s_se = _summarize(np.array([sel for _, sel, _ in ok]))
                q_hat = sum(hit for _, _, hit in ok) / len(ok)
                extras = {"l2_selected_mean": s_mean, "l2_selected_se": s_se,
                          "q_hat": q_hat}
                rows.append(ExperimentRow(3, f"model{model_id}", d, n,
                                          k_mean, k_se, len(ok), extras))
                failures.extend(f"{where}: {m}" for m in fails)
    return TableResult(3, cfg, tuple(rows), tuple(failures))


class _SfCell:
    """Per-replication work of one (process, d, n) cell of table 4."""

    def __init__(self, dgp: str, d: float, n: int, cfg: ExperimentConfig):
        model = FarimaModel.preset(dgp, d=d)
        self.gamma = autocov(model, n).values
        self.true_dense = true_inverse_dense(self.gamma, n)
        self.n = n
        self.c_list = cfg.c_list
        self.head = _seed_head(cfg, _DGPS.index(dgp) + 1, d, n)

    def rep(self, r: int):
        try:
            rng = np.random.default_rng(np.random.SeedSequence(self.head + [r]))
            u = _simulate_from_gamma(self.gamma, rng.standard_normal(self.n))
            cache = {"true_dense": self.true_dense}
            sfs = tuple(
                sensitivity(u, c, self.gamma, rel_tol=LOSS_REL_TOL,
                            _cache=cache).sf
                for c in self.c_list)
            return sfs, None
        except LongmemError as exc:
            return None, f"rep {r}: {exc}"


def run_sf_table(cfg: ExperimentConfig) -> TableResult:
    """Mean loss movement under bandwidth scaling, one row per (cell, c).

    The summary maps each n to the five-number summary and mean of the row
    means at that n, mirroring how the study is usually reported.
    """
    if cfg.table != 4:
        raise ParameterError("run_sf_table handles table 4")
    rows = []
    failures = []
    for dgp, n_list in cfg.dgp_n:
        for d in cfg.d_values:
            for n in n_list:
                cell = _SfCell(dgp, d, n, cfg)
                out = _map_reps(cell, cfg.reps)
                fails = [msg for _, msg in out if msg is not None]
                where = f"{dgp} d={d} n={n}"
                _check_failures(fails, cfg.reps, where)
                ok = np.array([sfs for sfs, msg in out if msg is None])
                for j, c in enumerate(cfg.c_list):
                    mean, se = _summarize(ok[:, j])
                    rows.append(ExperimentRow(4, dgp, d, n, mean, se,
                                              ok.shape[0], {"c": c}))
                failures.extend(f"{where}: {m}" for m in fails)
    summary = {}
    for n in sorted({row.n for row in rows}):
        means = np.array([row.value for row in rows if row.n == n])
        q1, med, q3 = np.percentile(means, [25.0, 50.0, 75.0])
        summary[n] = {"min": float(means.min()), "q1": float(q1),
                      "median": float(med), "q3": float(q3),
                      "max": float(means.max()), "mean": float(means.mean())}
    return TableResult(4, cfg, tuple(rows), tuple(failures), summary)


def run_table(cfg: ExperimentConfig) -> TableResult:
    if cfg.table in (1, 2):
        return run_l2_table(cfg)
    if cfg.table == 3:
        return run_regression_table(cfg)
    return run_sf_table(cfg)


_HEADERS = {
    1: "dgp,d,n,l2_mean,l2_se,reps",
    2: "dgp,d,n,l2_mean,l2_se,op_rate,ratio,reps",
    3: "model,d,n,l2_known_mean,l2_known_se,l2_selected_mean,l2_selected_se,q_hat,reps",
    4: "dgp,d,n,c,sf_mean,sf_se,reps",
}


def _row_fields(row: ExperimentRow) -> list:
    if row.table == 1:
        return [row.group, f"{row.d:g}", str(row.n), f"{row.value:.6f}",
                f"{row.se:.6f}", str(row.reps_used)]
    if row.table == 2:
        return [row.group, f"{row.d:g}", str(row.n), f"{row.value:.6f}",
                f"{row.se:.6f}", f"{row.extras['op_rate']:.6f}",
                f"{row.extras['ratio']:.6f}", str(row.reps_used)]
    if row.table == 3:
        return [row.group, f"{row.d:g}", str(row.n), f"{row.value:.6f}",
                f"{row.se:.6f}", f"{row.extras['l2_selected_mean']:.6f}",
                f"{row.extras['l2_selected_se']:.6f}",
                f"{row.extras['q_hat']:.6f}", str(row.reps_used)]
    return [row.group, f"{row.d:g}", str(row.n), f"{row.extras['c']:g}",
            f"{row.value:.6f}", f"{row.se:.6f}", str(row.reps_used)]


def table_csv(result: TableResult) -> str:
    """Fixed-order CSV rendering; identical runs give identical bytes."""
    lines = [_HEADERS[result.table]]
    lines.extend(",".join(_row_fields(row)) for row in result.rows)
    return "\n".join(lines) + "\n"


def table_json(result: TableResult) -> str:
    """JSON mirror of the CSV with full-precision floats."""
    rows = []
    for row in result.rows:
        if row.table in (1, 2):
            rec = {"dgp": row.group, "d": row.d, "n": row.n,
                   "l2_mean": row.value, "l2_se": row.se,
                   "reps": row.reps_used}
            rec.update(row.extras)
        elif row.table == 3:
            rec = {"model": row.group, "d": row.d, "n": row.n,
                   "l2_known_mean": row.value, "l2_known_se": row.se,
                   "reps": row.reps_used}
            rec.update(row.extras)
        else:
            rec = {"dgp": row.group, "d": row.d, "n": row.n,
                   "c": row.extras["c"], "sf_mean": row.value,
                   "sf_se": row.se, "reps": row.reps_used}
        rows.append(rec)
    doc = {"table": result.table, "seed": result.config.seed,
           "reps": result.config.reps, "rows": rows}
    if result.summary is not None:
        doc["summary"] = {str(n): s for n, s in result.summary.items()}
    if result.failures:
        doc["failures"] = list(result.failures)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
