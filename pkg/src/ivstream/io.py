"""Config files, the gasoline dataset loader and result CSVs.

Config files are flat ``key = value`` text; ``#`` starts a comment. Keys are
documented in the README. Every problem in a file is collected and reported
together rather than stopping at the first one.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .dgp import GaussianIvConfig, PriceSalesConfig
from .errors import ConfigError, InvalidArgumentError, ParseError
from .harness import BANDIT, DEFAULTS, KINDS, PRICE_SALES, REALDATA, REGRESSION, ExperimentConfig

# --- gasoline data ---------------------------------------------------------------

GASOLINE_COLUMNS = ("year", "GC", "PG", "RI", "RPN", "RPT", "RPU")


@dataclass(frozen=True)
class GasolineRow:
    year: int
    GC: float
    PG: float
    RI: float
    RPN: float
    RPT: float
    RPU: float

    @property
    def y(self) -> float:
        return self.GC

    @property
    def x(self) -> np.ndarray:
        """Covariates ``(1, PG, RI)``."""
        return np.array([1.0, self.PG, self.RI])

    @property
    def z(self) -> np.ndarray:
        """Instruments ``(1, RI, RPT, RPN, RPU)``."""
        return np.array([1.0, self.RI, self.RPT, self.RPN, self.RPU])


@dataclass
class GasolineData:
    rows: list

    def __len__(self):
        return len(self.rows)

    @property
    def years(self) -> np.ndarray:
        return np.array([r.year for r in self.rows])

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.rows])

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.rows])

    @property
    def Z(self) -> np.ndarray:
        return np.array([r.z for r in self.rows])


def bundled_gasoline_path() -> Path:
    """Path of the synthetic lookalike fixture shipped with the package."""
    return Path(str(resources.files("ivstream") / "data" / "gasoline.csv"))


def load_gasoline_csv(path=None) -> GasolineData:
    """Read a gasoline CSV keyed by header names (case-insensitive).

    Lines starting with ``#`` are ignored. Rows come back sorted by year.
    """
    path = bundled_gasoline_path() if path is None else Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    canon = {c.lower(): c for c in GASOLINE_COLUMNS}
    positions = {}
    for i, name in enumerate(header):
        key = name.lower()
        if key not in canon:
            raise ParseError(f"{path}: unexpected column {name!r}")
        if canon[key] in positions:
            raise ParseError(f"{path}: column {name!r} appears twice")
        positions[canon[key]] = i
    missing = [c for c in GASOLINE_COLUMNS if c not in positions]
    if missing:
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")

    rows, seen = [], {}
    for lineno, cells in enumerate(reader, start=1):
        if len(cells) != len(header):
            raise ParseError(f"{path}: row {lineno} has {len(cells)} cells, expected {len(header)}")
        values = {}
        for col in GASOLINE_COLUMNS:
            raw = cells[positions[col]].strip()
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(f"{path}: row {lineno}, column {col}: non-numeric value {raw!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {lineno}, column {col}: non-finite value {raw!r}")
            values[col] = v
        year = values["year"]
        if year != int(year):
            raise ParseError(f"{path}: row {lineno}, column year: {year!r} is not an integer")
        year = int(year)
        if year in seen:
            raise ParseError(f"{path}: row {lineno}, column year: duplicate year {year} "
                             f"(first seen in row {seen[year]})")
        seen[year] = lineno
        values["year"] = year
        rows.append(GasolineRow(**values))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    rows.sort(key=lambda r: r.year)
    return GasolineData(rows)


# --- config files -------------------------------------------------------------------

def _as_int(v: str) -> int:
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _as_bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _as_opt_float(v: str):
    return None if v.lower() in ("", "none", "auto") else float(v)


def _as_list(v: str) -> tuple:
    return tuple(s.strip() for s in v.replace(";", ",").split(",") if s.strip())


TOP_KEYS = {
    "kind": str, "T": _as_int, "n_runs": _as_int, "seed": _as_int, "lambda": float,
    "mu": float, "delta": float, "algorithms": _as_list, "output": str, "mode": str,
    "arms": _as_int, "sigma_eta": _as_opt_float, "log_beta": _as_bool,
}
GAUSSIAN_KEYS = {"d": _as_int, "d_z": _as_int, "d_x": _as_int, "beta_mean": float,
                 "corr_count": _as_int, "noise_scale": float}
PRICE_KEYS = {"rho": float, "rho_F": float, "rho_S": float, "theta": float, "beta": float,
              "event_prob": float, "eps_F_mean": float, "eps_F_sd": float,
              "eta_S_mean": float, "eta_S_sd": float, "intercept": _as_bool}
REALDATA_KEYS = {"path": str}
DGP_KEYS = {REGRESSION: GAUSSIAN_KEYS, BANDIT: GAUSSIAN_KEYS, PRICE_SALES: PRICE_KEYS,
            REALDATA: REALDATA_KEYS}
_FIELD = {"lambda": "lam"}


def read_key_values(text: str, source: str = "<config>") -> tuple[dict, list]:
    """Split ``key = value`` lines; returns ``(mapping, errors)``."""
    out, errors = {}, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            errors.append(f"{source}:{lineno}: key {key!r} given twice")
        out[key] = value
    return out, errors


def build_config(mapping: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a raw string mapping and fill per-kind defaults.

    Raises :class:`ConfigError` listing every problem found.
    """
    errors = []
    kind = mapping.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigError([f"kind must be one of {', '.join(KINDS)}, got {kind!r}"])
    top, dgp_raw = {}, {}
    for key, raw in mapping.items():
        if key == "kind":
            continue
        if key.startswith("dgp."):
            sub = key[4:]
            conv = DGP_KEYS[kind].get(sub)
            target = dgp_raw
        else:
            sub = key
            conv = TOP_KEYS.get(key)
            target = top
        if conv is None:
            errors.append(f"unknown key {key!r} for kind={kind!r}")
            continue
        try:
            target[sub] = conv(raw)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")

    dgp = None
    try:
        dgp = _build_dgp(kind, dgp_raw)
    except InvalidArgumentError as exc:
        errors.append(f"dgp: {exc}")
    except ValueError as exc:
        errors.append(f"dgp: {exc}")

    fields = dict(DEFAULTS[kind])
    for key, value in top.items():
        fields[_FIELD.get(key, key)] = value
    if kind == REALDATA:
        path = dgp_raw.get("path")
        if path is not None and base_dir is not None and not Path(path).is_absolute():
            path = str(Path(base_dir) / path)
        fields["data_path"] = path
    else:
        fields["dgp"] = dgp
    config = None
    try:
        config = ExperimentConfig(kind=kind, **fields)
    except TypeError as exc:
        errors.append(str(exc))
    if config is not None:
        errors.extend(p for p in config.problems()
                      if not (dgp is None and "dgp" in p))
    if errors:
        raise ConfigError(errors)
    return config


def _build_dgp(kind: str, raw: dict):
    raw = dict(raw)
    if kind in (REGRESSION, BANDIT):
        d = raw.pop("d", 50)
        raw.setdefault("d_z", d)
        raw.setdefault("d_x", d)
        template = (GaussianIvConfig.regression if kind == REGRESSION
                    else GaussianIvConfig.bandit)(raw["d_x"])
        raw.setdefault("corr_count", template.corr_count)
        raw.setdefault("noise_scale", template.noise_scale)
        return GaussianIvConfig(variant=template.variant, **raw)
    if kind == PRICE_SALES:
        rho = raw.pop("rho", None)
        if rho is not None:
            raw.setdefault("rho_F", rho)
            raw.setdefault("rho_S", rho)
        return PriceSalesConfig(**raw)
    return None


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    mapping, errors = read_key_values(text, str(path))
    try:
        config = build_config(mapping, base_dir=path.parent)
    except ConfigError as exc:
        raise ConfigError(errors + exc.errors) from None
    if errors:
        raise ConfigError(errors)
    return config


def config_hash(config: ExperimentConfig) -> str:
    """Short SHA-256 of the config's canonical JSON form (output path excluded)."""
    d = asdict(config)
    d.pop("output", None)
    if config.dgp is not None:
        d["dgp_type"] = type(config.dgp).__name__
    blob = json.dumps(d, sort_keys=True, default=repr).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# --- result CSVs --------------------------------------------------------------------

RESULT_COLUMNS = ("run_id", "t", "algorithm", "prediction", "ident_inc", "ident_cum",
                  "oracle_inc", "oracle_cum", "mse", "chosen_arm", "pseudo_regret")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def result_rows(runs: Sequence, algorithms: Optional[Sequence[str]] = None) -> Iterable[dict]:
    """Flatten run logs into result rows ordered by ``(algorithm, run_id, t)``.

    Algorithms follow ``algorithms`` when given (the config order), otherwise
    the order in which they first appear.
    """
    if algorithms is None:
        algorithms = list(dict.fromkeys(r.algorithm for r in runs))
    rank = {a: i for i, a in enumerate(algorithms)}
    for log in sorted(runs, key=lambda r: (rank[r.algorithm], r.run_id)):
        ident_cum = log.ident_cum
        oracle_cum = log.oracle_cum
        for t in range(log.T):
            row = {
                "run_id": log.run_id, "t": t + 1, "algorithm": log.algorithm,
                "prediction": log.prediction[t], "ident_inc": log.ident_inc[t],
                "ident_cum": ident_cum[t], "oracle_inc": log.oracle_inc[t],
                "oracle_cum": oracle_cum[t], "mse": log.mse[t],
                "chosen_arm": None if log.chosen_arm is None else int(log.chosen_arm[t]),
                "pseudo_regret": None if log.pseudo_regret is None else log.pseudo_regret[t],
            }
            if log.betas is not None:
                for j, b in enumerate(log.betas[t]):
                    row[f"beta_{j}"] = b
            yield row


def write_results(path, rows: Iterable[dict], config_hash: str = "", failures: int = 0,
                  beta_dim: int = 0) -> int:
    """Write rows as UTF-8 CSV behind a ``# config_hash=... failures=N`` line.

    Returns the number of data rows written.
    """
    columns = list(RESULT_COLUMNS) + [f"beta_{j}" for j in range(beta_dim)]
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash} failures={int(failures)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) if c not in ("algorithm",) else row[c]
                             for c in columns])
            n += 1
    return n


def read_results(path) -> tuple[dict, list]:
    """Inverse of :func:`write_results`: returns ``(header_meta, rows)``.

    Empty cells read back as ``None``; ``run_id``, ``t`` and ``chosen_arm`` as ints.
    """
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ParseError(f"{path}: missing '# config_hash=...' header line")
        for part in first[1:].split():
            if "=" in part:
                k, v = part.split("=", 1)
                meta[k] = v
        if "failures" in meta:
            meta["failures"] = int(meta["failures"])
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            row = {}
            for k, v in rec.items():
                if k == "algorithm":
                    row[k] = v
                elif v == "":
                    row[k] = None
                elif k in ("run_id", "t", "chosen_arm"):
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return meta, rows
