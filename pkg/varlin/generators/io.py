"""INI model files.

Example::

    [model]
    kind = markov
    id = two-state
    n = 64

    [initial]
    law = 0.5 0.5

    [transitions]
    default = 0.9 0.1; 0.1 0.9
    P3 = 0.5 0.5; 0.5 0.5

    [observable]
    values = -1 1

Kinds: ``iid`` (``[observable] values``, ``probs``), ``markov``, ``window``
(``[window] base`` path, ``half_width``, ``functional``), ``expanding``
(``[expanding] slopes``, ``observable``, ``exponent``, ``amplitude``) and
``reference`` (``[model] name`` plus builder keyword arguments in
``[parameters]``). Numbers are read as decimal strings through ``Fraction``.
"""

import configparser
import logging
from fractions import Fraction
from pathlib import Path

import numpy as np

from varlin.errors import ConfigError
from varlin.generators.builders import build_chain_model, build_doubling_model, build_iid_model
from varlin.generators.model import ArrayModel
from varlin.generators.window import local_window_array

logger = logging.getLogger(__name__)


def parse_number(text: str) -> float:
    """Parse a decimal or fraction string without locale dependence."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"Not a number: {text!r}") from e


def parse_vector(text: str) -> np.ndarray:
    return np.array([parse_number(tok) for tok in text.replace(",", " ").split()])


def parse_matrix(text: str) -> np.ndarray:
    rows = [parse_vector(row) for row in text.split(";") if row.strip()]
    if len({r.size for r in rows}) != 1:
        raise ConfigError(f"Ragged matrix: {text!r}")
    return np.vstack(rows)


def parse_parameter(text: str) -> int | float | str:
    """Builder keyword value: integer, number or bare string."""
    text = text.strip()
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        return text
    return int(value) if value.denominator == 1 and "." not in text else float(value)


def read_ini(path: str | Path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"File not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Malformed file {path}: {e}") from e
    return parser


def _require(parser: configparser.ConfigParser, section: str, key: str) -> str:
    if not parser.has_option(section, key):
        raise ConfigError(f"Missing [{section}] {key}")
    return parser.get(section, key)


def _transitions(parser: configparser.ConfigParser, n: int) -> np.ndarray:
    section = parser["transitions"]
    default = parse_matrix(section["default"]) if "default" in section else None
    size = default.shape[0] if default is not None else None
    stack = []
    for j in range(1, n + 1):
        key = f"P{j}"
        if key in section:
            stack.append(parse_matrix(section[key]))
        elif default is not None:
            stack.append(default)
        else:
            raise ConfigError(f"No transition matrix for index {j}")
        size = size or stack[-1].shape[0]
        if stack[-1].shape != (size, size):
            raise ConfigError(f"Transition matrix {key} has shape {stack[-1].shape}")
    return np.stack(stack)


def _observable_table(parser: configparser.ConfigParser, n: int) -> np.ndarray:
    section = parser["observable"]
    default = parse_vector(section["values"]) if "values" in section else None
    rows = []
    for j in range(1, n + 1):
        key = f"g{j}"
        if key in section:
            rows.append(parse_vector(section[key]))
        elif default is not None:
            rows.append(default)
        else:
            raise ConfigError(f"No observable for index {j}")
    return np.vstack(rows)


def load_model_file(path: str | Path) -> ArrayModel:
    """
    Build a validated model from an INI model file.

    Args:
        path: Model file path; relative ``base`` paths of window models are
            resolved against its directory.

    Raises:
        ConfigError: Malformed or incomplete file.
        ValidationError: The described model is not a valid array.
    """
    path = Path(path)
    parser = read_ini(path)
    kind = _require(parser, "model", "kind").strip().lower()
    model_id = parser.get("model", "id", fallback=path.stem)
    logger.debug("Loading %s model %s from %s", kind, model_id, path)

    if kind == "reference":
        from varlin.model_factory import build_reference_model

        params = {k: parse_parameter(v) for k, v in parser["parameters"].items()} if parser.has_section("parameters") else {}
        params["n"] = int(parse_number(_require(parser, "model", "n")))
        return build_reference_model(_require(parser, "model", "name").strip(), model_id=model_id, **params)

    if kind == "window":
        base_path = Path(_require(parser, "window", "base"))
        if not base_path.is_absolute():
            base_path = path.parent / base_path
        base = load_model_file(base_path)
        return local_window_array(
            base,
            int(parse_number(_require(parser, "window", "half_width"))),
            parser.get("window", "functional", fallback="sum").strip(),
            model_id=model_id,
        )

    n = int(parse_number(_require(parser, "model", "n")))
    if kind == "iid":
        values = parse_vector(_require(parser, "observable", "values"))
        probs = parse_vector(parser.get("observable", "probs")) if parser.has_option("observable", "probs") else None
        return build_iid_model(n, tuple(values), None if probs is None else tuple(probs), model_id=model_id)
    if kind == "markov":
        trans = _transitions(parser, n)
        law = parse_vector(parser.get("initial", "law")) if parser.has_option("initial", "law") else None
        memory = int(parse_number(parser.get("model", "memory", fallback="0")))
        return build_chain_model(trans, _observable_table(parser, n), initial_law=law, model_id=model_id, memory=memory)
    if kind == "expanding":
        slopes = [int(v) for v in parse_vector(_require(parser, "expanding", "slopes"))]
        return build_doubling_model(
            n,
            slopes=slopes[0] if len(slopes) == 1 else slopes,
            observable=parser.get("expanding", "observable", fallback="cosine").strip(),
            exponent=parse_number(parser.get("expanding", "exponent", fallback="1/2")),
            amplitude=parse_number(parser.get("expanding", "amplitude", fallback="1")),
            model_id=model_id,
        )
    raise ConfigError(f"Unknown model kind: {kind}")


__all__ = [
    "parse_number",
    "parse_vector",
    "parse_matrix",
    "parse_parameter",
    "read_ini",
    "load_model_file",
]
