"""
Configuration File Service
Key-value config files for variance components, simulations and verification runs

Files use the dotenv syntax (KEY=value, # comments). Component values are a
number or `file:<path>` naming a CSV table relative to the config file.
"""
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import ValidationError

from core.errors import ConfigError
from schemas.result import VerifyConfig
from schemas.simulation import GenerativeSpec, IncidenceSpec
from schemas.variance import CellMap, VarianceComponents
from services.dataset import TripletDataset

logger = logging.getLogger(__name__)

COMPONENT_KEYS = {"sigma2_a", "sigma2_b", "sigma2_e", "mu"}
INCIDENCE_KEYS = {"kind", "R", "C", "seed", "p", "alpha_row", "alpha_col", "target_n", "labels", "label_weights",
                  "label_unit"}
GENERATIVE_KEYS = {"model", "distribution", "singular_values", "tau2_u", "tau2_v", "tukey_lambda", "levels",
                   "label_effects"}
TABLE_PREFIX = "file:"


def read_key_values(path: Union[str, Path], allowed: Optional[set] = None) -> Dict[str, str]:
    """
    Read a key-value file

    Raises:
        ConfigError: missing file, a key without a value, or an unknown key
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    out = {}
    for key, value in values.items():
        if value is None or value.strip() == "":
            raise ConfigError(f"{path}: key '{key}' has no value")
        if allowed is not None and key not in allowed:
            raise ConfigError(f"{path}: unknown key '{key}'")
        out[key] = value.strip()
    logger.debug(f"Read {len(out)} keys from {path}")
    return out


def _number(key: str, raw: str, cast: Callable = float):
    try:
        value = cast(raw)
    except ValueError:
        raise ConfigError(f"key '{key}' expects a number, got {raw!r}")
    if cast is float and not np.isfinite(value):
        raise ConfigError(f"key '{key}' must be finite, got {raw!r}")
    return value


def _number_list(key: str, raw: str) -> List[float]:
    return [_number(key, part.strip()) for part in raw.split(",") if part.strip()]


def _name_list(raw: str) -> List[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _label_map(key: str, raw: str) -> Dict[str, float]:
    out = {}
    for item in _name_list(raw):
        label, sep, value = item.rpartition(":")
        if not sep or not label:
            raise ConfigError(f"key '{key}' expects label:value pairs, got {item!r}")
        out[label.strip()] = _number(key, value.strip())
    return out


def _read_table(base: Path, raw: str, columns: List[str]) -> pd.DataFrame:
    path = base / raw[len(TABLE_PREFIX):].strip()
    if not path.is_file():
        raise ConfigError(f"component table not found: {path}")
    frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    return frame


def _table_values(path_hint: Path, frame: pd.DataFrame) -> np.ndarray:
    values = pd.to_numeric(frame["value"], errors="coerce").to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{path_hint}: component table holds non-numeric values")
    return values


def _entity_table(base: Path, key: str, raw: str, index: Dict[str, int]) -> np.ndarray:
    frame = _read_table(base, raw, ["key", "value"])
    values = _table_values(base, frame)
    out = np.full(len(index), np.nan)
    for entity, value in zip(frame["key"], values):
        if entity not in index:
            raise ConfigError(f"{key}: entity {entity!r} is not in the dataset")
        out[index[entity]] = value
    if np.isnan(out).any():
        raise ConfigError(f"{key}: table does not cover every entity of the dataset")
    return out


def _cell_table(base: Path, raw: str, ds: TripletDataset) -> CellMap:
    frame = _read_table(base, raw, ["row", "col", "value"])
    values = _table_values(base, frame)
    try:
        rows = np.array([ds.row_index[k] for k in frame["row"]], dtype=np.int64)
        cols = np.array([ds.col_index[k] for k in frame["col"]], dtype=np.int64)
    except KeyError as e:
        raise ConfigError(f"sigma2_e: entity {e.args[0]!r} is not in the dataset")
    return CellMap(rows=rows, cols=cols, values=values)


def _components(raw: Dict[str, str], base: Path, ds: Optional[TripletDataset]) -> VarianceComponents:
    fields: Dict[str, object] = {}
    for key in ("sigma2_a", "sigma2_b", "sigma2_e", "mu"):
        if key not in raw:
            continue
        value = raw[key]
        if value.startswith(TABLE_PREFIX):
            if ds is None or key == "mu":
                raise ConfigError(f"key '{key}' cannot use a table here")
            if key == "sigma2_a":
                fields[key] = _entity_table(base, key, value, ds.row_index)
            elif key == "sigma2_b":
                fields[key] = _entity_table(base, key, value, ds.col_index)
            else:
                fields[key] = _cell_table(base, value, ds)
        else:
            fields[key] = _number(key, value)
    try:
        return VarianceComponents(**fields)
    except ValidationError as e:
        raise ConfigError(f"invalid variance components: {e.errors()[0]['msg']}")


def load_components(path: Union[str, Path], ds: Optional[TripletDataset] = None) -> VarianceComponents:
    """
    Variance components from keys sigma2_a, sigma2_b, sigma2_e and mu

    Per-entity tables (`file:` values) need the dataset to resolve keys:
    columns key,value for sigma2_a / sigma2_b and row,col,value for sigma2_e.
    """
    path = Path(path)
    raw = read_key_values(path, COMPONENT_KEYS)
    return _components(raw, path.parent, ds)


def load_simulation(path: Union[str, Path]) -> Tuple[IncidenceSpec, GenerativeSpec]:
    """Incidence and generative specs from one file; components must be scalars"""
    path = Path(path)
    raw = read_key_values(path, COMPONENT_KEYS | INCIDENCE_KEYS | GENERATIVE_KEYS)
    ifields: Dict[str, object] = {}
    for key in ("kind", "label_unit"):
        if key in raw:
            ifields[key] = raw[key]
    for key in ("R", "C", "seed", "target_n"):
        if key in raw:
            ifields[key] = _number(key, raw[key], int)
    for key in ("p", "alpha_row", "alpha_col"):
        if key in raw:
            ifields[key] = _number(key, raw[key])
    if "labels" in raw:
        ifields["labels"] = _name_list(raw["labels"])
    if "label_weights" in raw:
        ifields["label_weights"] = _number_list("label_weights", raw["label_weights"])

    gfields: Dict[str, object] = {"comp": _components(raw, path.parent, None)}
    for key in ("model", "distribution"):
        if key in raw:
            gfields[key] = raw[key]
    for key in ("singular_values", "tau2_u", "tau2_v", "levels"):
        if key in raw:
            gfields[key] = _number_list(key, raw[key])
    if "tukey_lambda" in raw:
        gfields["tukey_lambda"] = _number("tukey_lambda", raw["tukey_lambda"])
    if "label_effects" in raw:
        gfields["label_effects"] = _label_map("label_effects", raw["label_effects"])

    try:
        return IncidenceSpec(**ifields), GenerativeSpec(**gfields)
    except ValidationError as e:
        err = e.errors()[0]
        raise ConfigError(f"{path}: invalid simulation config ({'.'.join(map(str, err['loc']))}: {err['msg']})")


def load_verify_config(path: Optional[Union[str, Path]] = None) -> VerifyConfig:
    """Verification sizes; every key is optional"""
    if path is None:
        return VerifyConfig()
    allowed = set(VerifyConfig.model_fields)
    raw = read_key_values(path, allowed)
    fields = {}
    for key, value in raw.items():
        cast = float if VerifyConfig.model_fields[key].annotation is float else int
        fields[key] = _number(key, value, cast)
    try:
        return VerifyConfig(**fields)
    except ValidationError as e:
        err = e.errors()[0]
        raise ConfigError(f"{path}: invalid verify config ({'.'.join(map(str, err['loc']))}: {err['msg']})")
