"""
GreenLB - Configuration Files

Loads the YAML scenario/power/policy/study file into a ``SimConfig`` and a
``StudySpace``, and the server snapshot file used by ``greenlb eval``.
Unknown keys are rejected and missing keys are reported by dotted name.
"""

import logging
import math
from pathlib import Path
from types import MappingProxyType
from typing import NamedTuple

import yaml

import constants
from cluster_model import PowerModel, PowerState
from design_space import StudySpace
from errors import ConfigError
from policy_dsl import POLICY_LIBRARY, NdResolution, ServerSnapshot, parse_policy, read_policy_file
from sim_engine import SimConfig, StopCriterion

logger = logging.getLogger(__name__)

_TOP_KEYS = {"schema_version", "scenario", "power", "policy", "study"}
_SCENARIO_KEYS = {"num_servers", "arrival_rate", "service_time", "stop", "warmup",
                  "seed", "initial_state", "batches"}
_STOP_KEYS = {"max_requests", "max_virtual_time"}
_POWER_KEYS = {"on", "sleep", "suspend", "wakeup", "t_suspend", "t_wakeup", "timeout"}
_POLICY_KEYS = {"text", "file", "name", "nd", "params"}
_STUDY_KEYS = {"q", "timeout", "nd", "replications"}
_SNAPSHOT_KEYS = {"timeout", "power", "params", "servers"}
_SERVER_KEYS = {"queue_size", "state"}


class LoadedConfig(NamedTuple):
    sim: SimConfig
    study: StudySpace | None
    policy_text: str


# ====================================================================== #
# region           FIELD HELPERS                                          #
# ====================================================================== #

def _section(data, key, where, required=False):
    value = data.get(key)
    name = f"{where}.{key}" if where else key
    if value is None:
        if required:
            raise ConfigError(f"missing required key {name}")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{name} must be a mapping")
    return value


def _check_keys(data, allowed, where):
    unknown = sorted(set(data) - allowed)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key {prefix}{unknown[0]}")


def _number(value, name, allow_inf=False):
    if isinstance(value, str) and allow_inf and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot (1e5) as strings
        try:
            value = float(value.strip())
        except ValueError:
            raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if math.isnan(value):
        raise ConfigError(f"{name} must be a number, got nan")
    value = float(value)
    if math.isinf(value) and not allow_inf:
        raise ConfigError(f"{name} must be finite")
    return value


def _integer(value, name):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return value


def _power_model(data, timeout, where):
    defaults = PowerModel()
    return PowerModel(
        p_on=_number(data.get("on", defaults.p_on), f"{where}.on"),
        p_sleep=_number(data.get("sleep", defaults.p_sleep), f"{where}.sleep"),
        p_suspend=_number(data.get("suspend", defaults.p_suspend), f"{where}.suspend"),
        p_wakeup=_number(data.get("wakeup", defaults.p_wakeup), f"{where}.wakeup"),
        t_suspend=_number(data.get("t_suspend", defaults.t_suspend), f"{where}.t_suspend"),
        t_wakeup=_number(data.get("t_wakeup", defaults.t_wakeup), f"{where}.t_wakeup"),
        timeout=_number(timeout, f"{where}.timeout", allow_inf=True),
    ).validate()


def _read_yaml(path):
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as file:
            data = yaml.safe_load(file)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return data

# endregion


# ====================================================================== #
# region           RUN CONFIG                                             #
# ====================================================================== #

def _policy_text(policy, base_dir):
    sources = [k for k in ("text", "file", "name") if k in policy]
    if not sources:
        raise ConfigError("missing required key policy.text (or policy.file / policy.name)")
    if len(sources) > 1:
        raise ConfigError(f"policy takes one of text, file, name; got {', '.join(sources)}")
    if "text" in policy:
        return str(policy["text"])
    if "name" in policy:
        name = policy["name"]
        if name not in POLICY_LIBRARY:
            raise ConfigError(f"policy.name must be one of {', '.join(POLICY_LIBRARY)}, got {name!r}")
        return POLICY_LIBRARY[name]
    path = Path(policy["file"])
    if not path.is_absolute():
        path = base_dir / path
    try:
        return read_policy_file(path)
    except OSError as e:
        raise ConfigError(f"cannot read policy.file {path}: {e.strerror}") from e


def _study_space(study, master_seed):
    _check_keys(study, _STUDY_KEYS, "study")
    defaults = StudySpace(master_seed=master_seed)

    def as_list(key, default):
        values = study.get(key, list(default))
        if not isinstance(values, list):
            raise ConfigError(f"study.{key} must be a list")
        if not values:
            raise ConfigError(f"study.{key} is empty")
        return values

    q_values = tuple(_integer(v, "study.q") for v in as_list("q", defaults.q_values))
    timeouts = tuple(_number(v, "study.timeout", allow_inf=True)
                     for v in as_list("timeout", defaults.timeout_values))
    nd_values = tuple(NdResolution.parse(v)
                      for v in as_list("nd", [nd.value for nd in defaults.nd_values]))
    replications = _integer(study.get("replications", defaults.replications), "study.replications")
    return StudySpace(q_values, timeouts, nd_values, replications, master_seed)


def build_config(data, base_dir=".", seed=None):
    """Turn a parsed config mapping into a ``LoadedConfig``.

    Parameters
    ----------
    data : dict
        Parsed YAML.
    base_dir : path-like
        Directory ``policy.file`` is relative to.
    seed : int, optional
        Overrides ``scenario.seed``.

    Raises
    ------
    ConfigError
        Unknown or missing keys, bad values, policy file errors.
    PolicySyntaxError
        The policy text does not parse.
    """
    _check_keys(data, _TOP_KEYS, "")
    if "schema_version" not in data:
        raise ConfigError("missing required key schema_version")
    if data["schema_version"] != constants.SCHEMA_VERSION:
        raise ConfigError(f"schema_version {data['schema_version']!r} is not supported "
                          f"(expected {constants.SCHEMA_VERSION})")

    scenario = _section(data, "scenario", "", required=True)
    _check_keys(scenario, _SCENARIO_KEYS, "scenario")
    stop = _section(scenario, "stop", "scenario", required=True)
    _check_keys(stop, _STOP_KEYS, "scenario.stop")
    power = _section(data, "power", "")
    _check_keys(power, _POWER_KEYS, "power")
    policy = _section(data, "policy", "", required=True)
    _check_keys(policy, _POLICY_KEYS, "policy")

    stop_criterion = StopCriterion(
        max_requests=(_integer(stop["max_requests"], "scenario.stop.max_requests")
                      if "max_requests" in stop else None),
        max_virtual_time=(_number(stop["max_virtual_time"], "scenario.stop.max_virtual_time")
                          if "max_virtual_time" in stop else None),
    ).validate()

    text = _policy_text(policy, Path(base_dir))
    params = policy.get("params", {"q": 5}) or {}
    if not isinstance(params, dict):
        raise ConfigError("policy.params must be a mapping")
    params = {str(k): _number(v, f"policy.params.{k}") for k, v in params.items()}

    master_seed = _integer(scenario.get("seed", constants.MASTER_SEED), "scenario.seed")
    if seed is not None:
        master_seed = int(seed)

    sim = SimConfig(
        policy=parse_policy(text),
        num_servers=_integer(scenario.get("num_servers", constants.NUM_SERVERS), "scenario.num_servers"),
        arrival_rate=_number(scenario.get("arrival_rate", constants.ARRIVAL_RATE), "scenario.arrival_rate"),
        service_time=_number(scenario.get("service_time", constants.SERVICE_TIME), "scenario.service_time"),
        power=_power_model(power, power.get("timeout", constants.TIMEOUT), "power"),
        nd=NdResolution.parse(policy.get("nd", NdResolution.RANDOM_FRACTION.value)),
        design_params=params,
        stop=stop_criterion,
        warmup=_number(scenario.get("warmup", constants.WARMUP), "scenario.warmup"),
        rng_seed=master_seed,
        initial_state=PowerState.parse(scenario.get("initial_state", constants.INITIAL_STATE)),
        num_batches=_integer(scenario.get("batches", constants.NUM_BATCHES), "scenario.batches"),
    ).validate()

    study = None
    if data.get("study") is not None:
        study = _study_space(_section(data, "study", ""), master_seed)
    return LoadedConfig(sim, study, text)


def load_config(path, seed=None):
    """Read and validate a config file; see ``build_config``."""
    path = Path(path)
    logger.debug("loading config %s", path)
    return build_config(_read_yaml(path), base_dir=path.parent, seed=seed)

# endregion


# ====================================================================== #
# region           SNAPSHOT FILES                                         #
# ====================================================================== #

def build_snapshots(data):
    """Server snapshots from a parsed snapshot mapping, in file order."""
    _check_keys(data, _SNAPSHOT_KEYS, "")
    power = _section(data, "power", "")
    _check_keys(power, _POWER_KEYS - {"timeout"}, "power")
    model = _power_model(power, data.get("timeout", constants.TIMEOUT), "power")
    params = data.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping")
    params = MappingProxyType({str(k): _number(v, f"params.{k}") for k, v in params.items()})

    servers = data.get("servers")
    if not isinstance(servers, list) or not servers:
        raise ConfigError("missing required key servers (a non-empty list)")
    snapshots = []
    for i, entry in enumerate(servers):
        if not isinstance(entry, dict):
            raise ConfigError(f"servers[{i}] must be a mapping")
        _check_keys(entry, _SERVER_KEYS, f"servers[{i}]")
        if "state" not in entry or "queue_size" not in entry:
            raise ConfigError(f"servers[{i}] needs queue_size and state")
        snapshots.append(ServerSnapshot(
            id=i, num_servers=len(servers),
            queue_size=_integer(entry["queue_size"], f"servers[{i}].queue_size"),
            power_state=PowerState.parse(entry["state"]),
            power_on=model.p_on, power_sleep=model.p_sleep,
            power_suspend=model.p_suspend, power_wakeup=model.p_wakeup,
            time_wakeup=model.t_wakeup, time_suspend=model.t_suspend,
            timeout_time=model.timeout, design_params=params,
        ).validate())
    return snapshots


def load_snapshots(path):
    """Read a snapshot file for ``greenlb eval``."""
    return build_snapshots(_read_yaml(path))

# endregion
