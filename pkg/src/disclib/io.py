"""Text formats for set systems.

Both formats start with a header line ``m n``.

SETS: one line per set, ``k e_1 ... e_k`` with 1-based elements; every
listed element gets entry 1.

COO: one line per nonzero, ``row col value`` with 0-based indices and
``|value| <= 1``.

Blank lines and lines starting with ``#`` are ignored.
"""
from __future__ import annotations

from .core import SetSystemMatrix
from .errors import DiscError, ParseError


def _lines(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield no, line.split()


def _header(it):
    try:
        no, tok = next(it)
    except StopIteration:
        raise ParseError("missing header line 'm n'", 1) from None
    if len(tok) != 2:
        raise ParseError("header must be 'm n'", no)
    try:
        m, n = int(tok[0]), int(tok[1])
    except ValueError:
        raise ParseError("header fields must be integers", no) from None
    if m < 0 or n < 0:
        raise ParseError("dimensions must be nonnegative", no)
    return m, n


def parse_sets(text: str) -> SetSystemMatrix:
    it = _lines(text)
    m, n = _header(it)
    rows, cols = [], []
    count = 0
    last = 1
    for no, tok in it:
        last = no
        try:
            nums = [int(t) for t in tok]
        except ValueError:
            raise ParseError("set lines must contain integers", no) from None
        k, elems = nums[0], nums[1:]
        if k != len(elems):
            raise ParseError(f"set size {k} does not match {len(elems)} listed elements", no)
        if count >= m:
            raise ParseError(f"more than {m} sets", no)
        seen = set()
        for e in elems:
            if not 1 <= e <= n:
                raise ParseError(f"element {e} outside 1..{n}", no)
            if e in seen:
                raise ParseError(f"element {e} repeated", no)
            seen.add(e)
            rows.append(count)
            cols.append(e - 1)
        count += 1
    if count != m:
        raise ParseError(f"expected {m} sets, found {count}", last)
    return SetSystemMatrix(m, n, rows, cols, [1.0] * len(rows), validated=True)


def parse_coo(text: str) -> SetSystemMatrix:
    it = _lines(text)
    m, n = _header(it)
    rows, cols, vals = [], [], []
    seen = set()
    for no, tok in it:
        if len(tok) != 3:
            raise ParseError("COO lines must be 'row col value'", no)
        try:
            r, c, x = int(tok[0]), int(tok[1]), float(tok[2])
        except ValueError:
            raise ParseError("could not parse 'row col value'", no) from None
        if not (0 <= r < m and 0 <= c < n):
            raise ParseError(f"entry ({r}, {c}) outside a {m}x{n} matrix", no)
        if not abs(x) <= 1.0:
            raise ParseError(f"|value| = {abs(x)} exceeds 1", no)
        if (r, c) in seen:
            raise ParseError(f"duplicate entry ({r}, {c})", no)
        seen.add((r, c))
        rows.append(r)
        cols.append(c)
        vals.append(x)
    try:
        return SetSystemMatrix(m, n, rows, cols, vals)
    except DiscError as exc:
        raise ParseError(str(exc)) from exc


def parse_input(text: str, fmt: str = "sets") -> SetSystemMatrix:
    if fmt == "sets":
        return parse_sets(text)
    if fmt == "coo":
        return parse_coo(text)
    raise ValueError(f"unknown format {fmt!r}")


def emit_sets(A: SetSystemMatrix) -> str:
    if A.nnz and not (A.row_val == 1.0).all():
        raise ValueError("SETS format holds 0/1 matrices only")
    out = [f"{A.m} {A.n}"]
    for i in range(A.m):
        cols, _ = A.row(i)
        out.append(" ".join([str(cols.size)] + [str(int(c) + 1) for c in cols]))
    return "\n".join(out) + "\n"


def emit_coo(A: SetSystemMatrix) -> str:
    out = [f"{A.m} {A.n}"]
    out.extend(f"{r} {c} {v!r}" for r, c, v in A.entries())
    return "\n".join(out) + "\n"


def emit(A: SetSystemMatrix, fmt: str = "sets") -> str:
    return emit_sets(A) if fmt == "sets" else emit_coo(A)
