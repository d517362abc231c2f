"""Device configuration files.

A device config is the JSON form of SystemParams with explicit unit suffixes
on every key. Frequencies and rates accept either an angular key (_rad_s) or
an ordinary-frequency key (_hz, converted by 2*pi); exactly one of each pair
must be present. Unknown keys are rejected so that typos cannot silently
change a run. An optional free-form "meta" block (and "name") is carried
through untouched for provenance and published reference values.
"""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources

from .errors import ConfigValidationError, InvalidParameterError
from .params import CantileverParams, CavityParams, EnvironmentParams, SystemParams

__all__ = [
    "parse_device_config",
    "load_device_config",
    "system_params_to_config",
    "params_digest",
    "canonical_json",
    "bundled_device",
    "list_bundled_devices",
]

_TWO_PI = 2.0 * math.pi

# field -> (kind, target attribute); kind "freq" takes the _rad_s/_hz pair
_CAVITY_FIELDS = {
    "omega_c": ("freq", "omega_c"),
    "Gamma_c": ("freq", "Gamma_c"),
    "alpha": ("freq", "alpha"),
    "omega_p": ("freq", "omega_p"),
    "L_c_m": ("plain", "L_c"),
    "P_w": ("plain", "P"),
}
_CANTILEVER_FIELDS = {
    "omega_m": ("freq", "omega_m"),
    "m_kg": ("plain", "m"),
    "Q_m": ("plain", "Q_m"),
    "tau_s": ("plain", "tau"),
    "chi_s_per_m": ("plain", "chi"),
    "L_m_m": ("plain", "L_m"),
    "s_m2": ("plain", "s"),
    "kappa_w_per_m_k": ("plain", "kappa"),
    "epsilon": ("plain", "epsilon"),
}
_ENVIRONMENT_FIELDS = {"T_k": ("plain", "T")}


def _extract_section(section: str, data: dict, fields: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{section}: expected an object")
    out: dict[str, float] = {}
    seen: set[str] = set()
    for field, (kind, attr) in fields.items():
        if kind == "freq":
            k_rad, k_hz = f"{field}_rad_s", f"{field}_hz"
            present = [k for k in (k_rad, k_hz) if k in data]
            if len(present) != 1:
                raise ConfigValidationError(
                    f"{section}: exactly one of '{k_rad}' or '{k_hz}' required, found {len(present)}"
                )
            key = present[0]
            val = data[key]
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigValidationError(f"{section}.{key}: expected a number, got {type(val).__name__}")
            out[attr] = float(val) * (_TWO_PI if key == k_hz else 1.0)
            seen.add(key)
        else:
            if field not in data:
                if field == "epsilon":  # the only defaulted key
                    continue
                raise ConfigValidationError(f"{section}: missing required key '{field}'")
            val = data[field]
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigValidationError(f"{section}.{field}: expected a number, got {type(val).__name__}")
            out[attr] = float(val)
            seen.add(field)
    unknown = set(data) - seen
    if unknown:
        raise ConfigValidationError(f"{section}: unknown key(s) {sorted(unknown)}")
    return out


def parse_device_config(doc: dict) -> tuple[SystemParams, str, dict]:
    """Validate a parsed JSON document; returns (params, name, meta)."""
    if not isinstance(doc, dict):
        raise ConfigValidationError("config root: expected an object")
    allowed = {"name", "meta", "cavity", "cantilever", "environment"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigValidationError(f"config root: unknown key(s) {sorted(unknown)}")
    for sect in ("cavity", "cantilever", "environment"):
        if sect not in doc:
            raise ConfigValidationError(f"config root: missing required section '{sect}'")
    name = doc.get("name", "device")
    if not isinstance(name, str):
        raise ConfigValidationError("name: expected a string")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise ConfigValidationError("meta: expected an object")
    try:
        params = SystemParams(
            cavity=CavityParams(**_extract_section("cavity", doc["cavity"], _CAVITY_FIELDS)),
            cantilever=CantileverParams(**_extract_section("cantilever", doc["cantilever"], _CANTILEVER_FIELDS)),
            environment=EnvironmentParams(**_extract_section("environment", doc["environment"], _ENVIRONMENT_FIELDS)),
        )
    except InvalidParameterError as exc:
        raise ConfigValidationError(str(exc)) from exc
    return params, name, meta


def load_device_config(path: str) -> tuple[SystemParams, str, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigValidationError(f"{path}: invalid JSON: {exc}") from exc
    return parse_device_config(doc)


def system_params_to_config(p: SystemParams, name: str = "device", meta: dict | None = None) -> dict:
    """Serialize SystemParams back to the canonical (_rad_s) config form."""
    doc = {
        "name": name,
        "cavity": {
            "omega_c_rad_s": p.cavity.omega_c,
            "L_c_m": p.cavity.L_c,
            "Gamma_c_rad_s": p.cavity.Gamma_c,
            "alpha_rad_s": p.cavity.alpha,
            "omega_p_rad_s": p.cavity.omega_p,
            "P_w": p.cavity.P,
        },
        "cantilever": {
            "omega_m_rad_s": p.cantilever.omega_m,
            "m_kg": p.cantilever.m,
            "Q_m": p.cantilever.Q_m,
            "tau_s": p.cantilever.tau,
            "chi_s_per_m": p.cantilever.chi,
            "L_m_m": p.cantilever.L_m,
            "s_m2": p.cantilever.s,
            "kappa_w_per_m_k": p.cantilever.kappa,
            "epsilon": p.cantilever.epsilon,
        },
        "environment": {"T_k": p.environment.T},
    }
    if meta:
        doc["meta"] = meta
    return doc


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace, repr-exact floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def params_digest(p: SystemParams) -> str:
    """Short sha256 digest of the canonical parameter serialization."""
    doc = system_params_to_config(p)
    doc.pop("name", None)
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:16]


def list_bundled_devices() -> list[str]:
    files = resources.files("photocool.data")
    return sorted(f.name[: -len(".json")] for f in files.iterdir() if f.name.endswith(".json"))


def bundled_device(name: str) -> tuple[SystemParams, str, dict]:
    """Load one of the packaged example devices by name."""
    ref = resources.files("photocool.data").joinpath(f"{name}.json")
    if not ref.is_file():
        raise ConfigValidationError(f"no bundled device named {name!r}; have {list_bundled_devices()}")
    return parse_device_config(json.loads(ref.read_text(encoding="utf-8")))
