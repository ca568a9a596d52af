"""Line-numbered CSV reading and round-trip float formatting shared by the file formats."""

import csv
import io
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import ParseError


def format_float(value: float) -> str:
    """Shortest decimal text that parses back to the same float."""
    return repr(float(value))


def parse_float(text: str, column: str, line: int, source: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column '{column}': not a number: {text!r}", source, line) from None
    if not math.isfinite(value):
        raise ParseError(f"column '{column}': value must be finite", source, line)
    return value


def read_table(
    text: str,
    header: Sequence[str],
    source: str,
) -> Tuple[List[Tuple[int, Dict[str, str]]], Dict[str, str]]:
    """
    Read the data rows of a headed CSV document.

    Blank lines and lines whose first non-space character is ``#`` are
    skipped; ``# key=value`` comments are returned as metadata. The first
    remaining line must equal ``header``.

    Args:
        text: Document text
        header: Expected column names, in order
        source: Name used in diagnostics

    Returns:
        ([(1-based line number, column -> raw text)], metadata)

    Raises:
        ParseError: Missing/incorrect header or wrong column count
    """
    comments: List[str] = []
    rows: List[Tuple[int, Dict[str, str]]] = []
    seen_header = False
    reader = csv.reader(io.StringIO(text))
    try:
        for cells in reader:
            line = reader.line_num
            if not cells or all(not c.strip() for c in cells):
                continue
            if cells[0].lstrip().startswith("#"):
                comments.append(",".join(cells).lstrip()[1:].strip())
                continue
            cells = [c.strip() for c in cells]
            if not seen_header:
                if cells != list(header):
                    raise ParseError(f"expected header '{','.join(header)}'", source, line)
                seen_header = True
                continue
            if len(cells) != len(header):
                raise ParseError(f"expected {len(header)} columns, found {len(cells)}", source, line)
            rows.append((line, dict(zip(header, cells))))
    except csv.Error as e:
        raise ParseError(str(e), source, reader.line_num) from None
    if not seen_header:
        raise ParseError(f"missing header '{','.join(header)}'", source, None)
    return rows, comment_metadata(comments)


def comment_metadata(comments: Iterable[str]) -> Dict[str, str]:
    """Collect ``key=value`` pairs from comment lines."""
    meta: Dict[str, str] = {}
    for comment in comments:
        key, sep, value = comment.partition("=")
        if sep and key.strip() and " " not in key.strip():
            meta[key.strip()] = value.strip()
    return meta


def render_csv(header: Sequence[str], rows: Iterable[Sequence[str]], comments: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def read_text(path: Path) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("file not found", str(path), None) from None
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text: {e.reason}", str(path), None) from None


def write_text(path: Path, text: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return str(path)
