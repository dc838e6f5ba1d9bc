"""Built-in test problems and a string registry for the CLI.

Names are ``hs<id>`` (for example ``hs6``) or ``da:T=45,gobs=3,seed=7`` with
optional ``dt=`` for the Lorenz-63 4DVAR instances.
"""

from __future__ import annotations

from ..model import Problem
from .hs import HS_IDS, SUPPORTED_HS, make_hs
from .lorenz import DAConfig, lorenz_rhs, make_4dvar, observe, rk4_step

DEFAULT_DA = "da:T=45,gobs=3,seed=7"

__all__ = ["DAConfig", "HS_IDS", "SUPPORTED_HS", "DEFAULT_DA", "get_problem", "lorenz_rhs",
           "make_4dvar", "make_hs", "observe", "rk4_step", "suite"]


def _parse_da(name: str) -> DAConfig:
    body = name.split(":", 1)[1] if ":" in name else ""
    kwargs = {}
    keys = {"T": ("T", int), "gobs": ("gamma_obs", int), "seed": ("seed", int),
            "dt": ("dt", float)}
    for item in filter(None, body.split(",")):
        key, _, value = item.partition("=")
        if key.strip() not in keys:
            raise ValueError(f"unknown data-assimilation parameter {key!r} in {name!r}")
        field, conv = keys[key.strip()]
        kwargs[field] = conv(value)
    return DAConfig(**kwargs)


def get_problem(name: str) -> Problem:
    """Resolve a registry name to a problem instance."""
    key = name.strip().lower()
    if key.startswith("hs"):
        try:
            pid = int(key[2:])
        except ValueError:
            raise ValueError(f"malformed problem name {name!r}") from None
        return make_hs(pid)
    if key == "da" or key.startswith("da:"):
        cfg = _parse_da(name.strip())
        return make_4dvar(cfg, name=_canonical_da(cfg))
    raise ValueError(f"unknown problem {name!r}")


def _canonical_da(cfg: DAConfig) -> str:
    name = f"da:T={cfg.T},gobs={cfg.gamma_obs},seed={cfg.seed}"
    return name if cfg.dt == DAConfig.dt else f"{name},dt={cfg.dt:g}"


def suite(spec: str, seed: int = 7) -> list[str]:
    """Expand ``hs``, ``da``, ``all`` or a comma list of names into problem names."""
    names: list[str] = []
    for part in _split_names(spec):
        if part == "hs":
            names += [f"hs{i}" for i in SUPPORTED_HS]
        elif part == "da":
            names.append(f"da:T=45,gobs=3,seed={seed}")
        elif part == "all":
            names += [f"hs{i}" for i in SUPPORTED_HS] + [f"da:T=45,gobs=3,seed={seed}"]
        else:
            names.append(part)
    return names


def _split_names(spec: str) -> list[str]:
    # commas also separate da parameters, so glue "key=value" pieces back on
    parts: list[str] = []
    for piece in spec.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if parts and parts[-1].startswith("da:") and "=" in piece and ":" not in piece:
            parts[-1] += "," + piece
        else:
            parts.append(piece)
    return parts
