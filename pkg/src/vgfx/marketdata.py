"""File-based ingestion of rate series and option-chain snapshots.

Rate CSV: two columns ``date,value``; optional header; ``.`` marks a missing
observation. Values are decimals (``0.0524``) or percentages with a ``%``
suffix (``5.24%``). Dates are ISO-8601 unless ``lenient=True``.

Chain CSV: header ``expiry,strike,right,price``; optional leading
``# as_of: YYYY-MM-DD`` and ``# underlying: SYMBOL`` lines.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .analytics import QuoteComparison
from .errors import ConfigError, DuplicateQuote, EmptySeries, MissingStrike, ParseError

MISSING = "."
CHAIN_COLUMNS = ("expiry", "strike", "right", "price")
_LENIENT_FORMATS = ("%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d", "%d-%m-%Y", "%Y%m%d")


def parse_date(text: str, lenient: bool = False) -> date:
    text = text.strip()
    if not lenient:
        return date.fromisoformat(text)
    for fmt in _LENIENT_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unrecognised date {text!r}")


@dataclass(frozen=True)
class RateSeries:
    series_id: str
    dates: tuple
    values: tuple
    dropped: int = 0
    percent_parsed: bool = False

    def __len__(self):
        return len(self.dates)

    def as_of(self, when: date) -> float:
        """Last observation on or before ``when``."""
        if isinstance(when, str):
            when = date.fromisoformat(when)
        idx = None
        for k, d in enumerate(self.dates):
            if d <= when:
                idx = k
            else:
                break
        if idx is None:
            raise EmptySeries(f"{self.series_id}: no observation on or before {when}")
        return self.values[idx]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"date,{self.series_id}\n")
        for d, v in zip(self.dates, self.values):
            buf.write(f"{d.isoformat()},{v!r}\n")
        return buf.getvalue()


def _is_header(row) -> bool:
    try:
        date.fromisoformat(row[0].strip())
        return False
    except ValueError:
        pass
    try:
        float(row[1].strip().rstrip("%"))
        return False
    except (ValueError, IndexError):
        return True


def load_rate_csv(path, series_id: str | None = None, lenient: bool = False) -> RateSeries:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    rows = [(n, r) for n, r in enumerate(csv.reader(io.StringIO(text)), start=1) if r and any(c.strip() for c in r)]
    if rows and _is_header(rows[0][1]):
        header = rows.pop(0)[1]
        if series_id is None and len(header) > 1:
            series_id = header[1].strip()
    series_id = series_id or path.stem
    dates, values = [], []
    dropped = 0
    percent = False
    for line, row in rows:
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", line, path)
        raw_date, raw_value = row[0].strip(), row[1].strip()
        try:
            d = parse_date(raw_date, lenient)
        except ValueError as exc:
            raise ParseError(f"bad date {raw_date!r}", line, path) from exc
        if raw_value == MISSING or raw_value == "":
            dropped += 1
            continue
        try:
            if raw_value.endswith("%"):
                v = float(raw_value[:-1]) / 100.0
                percent = True
            else:
                v = float(raw_value)
        except ValueError as exc:
            raise ParseError(f"bad value {raw_value!r}", line, path) from exc
        if not math.isfinite(v):
            raise ParseError(f"non-finite value {raw_value!r}", line, path)
        if dates and d <= dates[-1]:
            raise ParseError(f"dates must be strictly increasing ({d} after {dates[-1]})", line, path)
        dates.append(d)
        values.append(v)
    if not dates:
        raise EmptySeries(f"{path}: no observations")
    return RateSeries(series_id, tuple(dates), tuple(values), dropped, percent)


@dataclass(frozen=True)
class Quote:
    expiry: date
    strike: float
    right: str
    price: float


@dataclass(frozen=True)
class OptionChain:
    quotes: tuple
    as_of: date | None = None
    underlying: str = ""

    def __len__(self):
        return len(self.quotes)

    @property
    def strikes(self) -> list[float]:
        return [q.strike for q in self.quotes]

    def select(self, right: str | None = None, expiry: date | None = None) -> "OptionChain":
        qs = tuple(q for q in self.quotes
                   if (right is None or q.right == right) and (expiry is None or q.expiry == expiry))
        return OptionChain(qs, self.as_of, self.underlying)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.as_of is not None:
            buf.write(f"# as_of: {self.as_of.isoformat()}\n")
        if self.underlying:
            buf.write(f"# underlying: {self.underlying}\n")
        buf.write(",".join(CHAIN_COLUMNS) + "\n")
        for q in self.quotes:
            buf.write(f"{q.expiry.isoformat()},{q.strike!r},{q.right},{q.price!r}\n")
        return buf.getvalue()


def load_chain_csv(path, as_of: date | None = None, underlying: str | None = None) -> OptionChain:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    meta = {}
    body = []
    for n, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, _, value = s[1:].partition(":")
            meta[key.strip().lower()] = value.strip()
            continue
        body.append((n, raw))
    if not body:
        raise EmptySeries(f"{path}: empty option chain")
    if as_of is None and "as_of" in meta:
        try:
            as_of = date.fromisoformat(meta["as_of"])
        except ValueError as exc:
            raise ParseError(f"bad as_of {meta['as_of']!r}", path=path) from exc
    underlying = underlying if underlying is not None else meta.get("underlying", "")

    header_line, header = body[0]
    cols = [c.strip().lower() for c in next(csv.reader([header]))]
    if tuple(cols) != CHAIN_COLUMNS:
        raise ParseError(f"expected columns {','.join(CHAIN_COLUMNS)}, got {','.join(cols)}",
                         header_line, path)
    quotes = []
    seen = set()
    for n, raw in body[1:]:
        row = [c.strip() for c in next(csv.reader([raw]))]
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, got {len(row)}", n, path)
        try:
            expiry = date.fromisoformat(row[0])
            strike = float(row[1])
            price = float(row[3])
        except ValueError as exc:
            raise ParseError(str(exc), n, path) from exc
        right = row[2].lower()
        if right in ("p", "put"):
            right = "put"
        elif right in ("c", "call"):
            right = "call"
        else:
            raise ParseError(f"right must be put or call, got {row[2]!r}", n, path)
        if not (strike > 0 and math.isfinite(strike)):
            raise ParseError(f"strike must be > 0, got {row[1]!r}", n, path)
        if not (price >= 0 and math.isfinite(price)):
            raise ParseError(f"price must be >= 0, got {row[3]!r}", n, path)
        if as_of is not None and not expiry > as_of:
            raise ParseError(f"expiry {expiry} is not after as_of {as_of}", n, path)
        key = (expiry, strike, right)
        if key in seen:
            raise DuplicateQuote(f"{path}:{n}: duplicate quote {expiry} {strike} {right}")
        seen.add(key)
        quotes.append(Quote(expiry, strike, right, price))
    if not quotes:
        raise EmptySeries(f"{path}: option chain has no quotes")
    return OptionChain(tuple(quotes), as_of, underlying)


def _price_of(result) -> float:
    return float(getattr(result, "price", result))


def build_comparison(chain: OptionChain, results) -> QuoteComparison:
    """Align chain quotes with model prices keyed by strike (or ``(strike, right)``)."""
    strikes, sim, mkt = [], [], []
    for q in chain.quotes:
        if (q.strike, q.right) in results:
            r = results[(q.strike, q.right)]
        elif q.strike in results:
            r = results[q.strike]
        else:
            raise MissingStrike(f"no model price for strike {q.strike} ({q.right})")
        strikes.append(q.strike)
        sim.append(_price_of(r))
        mkt.append(q.price)
    return QuoteComparison(np.array(strikes), np.array(sim), np.array(mkt))


def load_results_csv(path, style: str | None = None) -> dict:
    """Model prices as ``strike -> price`` from a CSV with ``strike`` and ``price`` columns.

    When the file has a ``style`` column, pass ``style`` to keep one exercise
    style; a strike appearing twice for the kept rows is a DuplicateQuote.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"strike", "price"} <= set(reader.fieldnames):
        raise ParseError("results file needs 'strike' and 'price' columns", 1, path)
    out = {}
    for n, row in enumerate(reader, start=2):
        if style is not None and row.get("style", style) != style:
            continue
        try:
            strike = float(row["strike"])
            value = float(row["price"])
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), n, path) from exc
        if strike in out:
            raise DuplicateQuote(f"{path}:{n}: strike {strike} listed twice")
        out[strike] = value
    if not out:
        raise EmptySeries(f"{path}: no results")
    return out


def time_to_expiry(chain: OptionChain, expiry: date, day_count: float = 365.0) -> float:
    if chain.as_of is None:
        raise ConfigError("chain has no as_of date")
    return (expiry - chain.as_of).days / day_count
