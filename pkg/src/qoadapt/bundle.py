"""Plain-text matrix bundles for feeding hierarchies to the analyzer from disk.

A bundle is a sequence of sections, each a dense matrix written as a header
line ``rows cols`` followed by row-major whitespace-separated values::

    GRAM_X
    2 2
    1 0
    0 1
    ...
    RHS
    2 1
    1
    0
    SPACE 0
    2 1
    1
    0

Required sections: GRAM_X, GRAM_Y, FORM, RHS and SPACE 0..L-1.  Optional
SPACE_Y k sections supply distinct test spaces; when absent the trial columns
are reused.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .qo import SpaceHierarchy

__all__ = ["load_bundle", "save_bundle", "BundleFormatError"]

_SECTION_RE = re.compile(r"^([A-Z_]+)(?:\s+(\d+))?$")


class BundleFormatError(ValueError):
    """The bundle file does not follow the section format."""


def _tokenize(path: Path) -> list[str]:
    tokens: list[str] = []
    for line in path.read_text().splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            tokens.append(stripped)
    return tokens


def load_bundle(path) -> SpaceHierarchy:
    """Parse a bundle file into a :class:`SpaceHierarchy`."""
    path = Path(path)
    lines = _tokenize(path)
    sections: dict[tuple[str, int | None], np.ndarray] = {}
    i = 0
    while i < len(lines):
        header = _SECTION_RE.match(lines[i])
        if header is None:
            raise BundleFormatError(f"expected a section name, got {lines[i]!r}")
        name = header.group(1)
        index = int(header.group(2)) if header.group(2) is not None else None
        i += 1
        if i >= len(lines):
            raise BundleFormatError(f"section {name} is missing its shape line")
        try:
            rows, cols = (int(tok) for tok in lines[i].split())
        except ValueError as exc:
            raise BundleFormatError(f"bad shape line for section {name}: {lines[i]!r}") from exc
        i += 1
        values: list[float] = []
        while len(values) < rows * cols:
            if i >= len(lines):
                raise BundleFormatError(
                    f"section {name}: expected {rows * cols} values, got {len(values)}"
                )
            try:
                values.extend(float(tok) for tok in lines[i].split())
            except ValueError as exc:
                raise BundleFormatError(f"bad value in section {name}: {lines[i]!r}") from exc
            i += 1
        if len(values) != rows * cols:
            raise BundleFormatError(f"section {name}: too many values")
        sections[(name, index)] = np.array(values).reshape(rows, cols)

    def require(name: str) -> np.ndarray:
        if (name, None) not in sections:
            raise BundleFormatError(f"missing section {name}")
        return sections[(name, None)]

    gram_x = require("GRAM_X")
    gram_y = require("GRAM_Y")
    form = require("FORM")
    rhs = require("RHS")
    if 1 not in rhs.shape:
        raise BundleFormatError("RHS must be a vector (one dimension of size 1)")
    rhs = rhs.reshape(-1)
    x_spaces = []
    level = 0
    while ("SPACE", level) in sections:
        x_spaces.append(sections[("SPACE", level)])
        level += 1
    if not x_spaces:
        raise BundleFormatError("bundle contains no SPACE sections")
    y_spaces = []
    for k in range(level):
        y_spaces.append(sections.get(("SPACE_Y", k), x_spaces[k]))
    return SpaceHierarchy(
        gram_x=gram_x,
        gram_y=gram_y,
        form=form,
        rhs=rhs,
        x_spaces=tuple(x_spaces),
        y_spaces=tuple(y_spaces),
    )


def _write_matrix(out: list[str], name: str, a: np.ndarray) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    out.append(name)
    out.append(f"{a.shape[0]} {a.shape[1]}")
    for row in a:
        out.append(" ".join(f"{x:.17g}" for x in row))


def save_bundle(path, h: SpaceHierarchy) -> None:
    """Write a hierarchy as a bundle file (17 significant digits, round-trip exact)."""
    out: list[str] = []
    _write_matrix(out, "GRAM_X", h.gram_x)
    _write_matrix(out, "GRAM_Y", h.gram_y)
    _write_matrix(out, "FORM", h.form)
    _write_matrix(out, "RHS", h.rhs.reshape(-1, 1))
    for k, space in enumerate(h.x_spaces):
        _write_matrix(out, f"SPACE {k}", space)
    for k, space in enumerate(h.y_spaces):
        if space is not h.x_spaces[k] and not np.array_equal(space, h.x_spaces[k]):
            _write_matrix(out, f"SPACE_Y {k}", space)
    Path(path).write_text("\n".join(out) + "\n")
