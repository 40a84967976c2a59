"""Sectioned key = value configuration files and CSV output."""

from __future__ import annotations

import configparser
import csv
import io
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError


def read_config(source: str | Path) -> dict[str, dict[str, str]]:
    """Parse a config file (or its text) into {section: {key: value}}."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = str(source)
    try:
        if "\n" not in text and Path(text).exists():
            with open(text, encoding="utf-8") as fh:
                cp.read_file(fh)
        else:
            cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return {sec: dict(cp.items(sec)) for sec in cp.sections()}


def write_config(cfg: dict[str, dict], path: str | Path | None = None) -> str:
    cp = configparser.ConfigParser()
    for sec, kv in cfg.items():
        cp[sec] = {k: str(v) for k, v in kv.items()}
    buf = io.StringIO()
    cp.write(buf)
    if path is not None:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path: str | Path | None = None) -> str:
    """Write rows under a mandatory header; returns the text, also written to ``path`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row of length {len(row)} under a header of length {len(header)}")
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        if str(path) == "-":
            sys.stdout.write(text)
        else:
            Path(path).write_text(text, encoding="utf-8")
    return text


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
