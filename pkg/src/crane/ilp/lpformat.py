"""CPLEX LP text export of the migration model, and a reader for it."""

from __future__ import annotations

from dataclasses import dataclass, field

from crane.ilp.model import ILPModel, Row

TERMS_PER_LINE = 8


def _num(value: float) -> str:
    return f"{value:.12g}"


def _expr(terms) -> list[str]:
    chunks = []
    for n, (name, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = name if mag == 1 else f"{_num(mag)} {name}"
        if n == 0:
            chunks.append(f"- {body}" if sign == "-" else body)
        else:
            chunks.append(f"{sign} {body}")
    lines = []
    for s in range(0, len(chunks), TERMS_PER_LINE):
        lines.append(" ".join(chunks[s : s + TERMS_PER_LINE]))
    if not lines:
        raise ValueError("empty linear expression")
    return lines


def export_text(model: ILPModel) -> str:
    out = [
        f"\\ replica migration model: |S|={model.n} |P|={model.m} |E|={model.n_res} T={model.T} beta={_num(model.beta)}",
        "Minimize",
    ]
    obj = _expr(model.objective())
    out.append(f" obj: {obj[0]}")
    out += [f"   {line}" for line in obj[1:]]
    out.append("Subject To")
    for row in model.rows():
        expr = _expr(row.terms)
        if len(expr) == 1:
            out.append(f" {row.label}: {expr[0]} {row.sense} {_num(row.rhs)}")
        else:
            out.append(f" {row.label}: {expr[0]}")
            out += [f"   {line}" for line in expr[1:-1]]
            out.append(f"   {expr[-1]} {row.sense} {_num(row.rhs)}")
    out.append("Bounds")
    for name, lo, hi in model.bounds():
        if lo == hi:
            out.append(f" {name} = {_num(lo)}")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    out.append("Binaries")
    names = list(model.binaries())
    for s in range(0, len(names), TERMS_PER_LINE):
        out.append(" " + " ".join(names[s : s + TERMS_PER_LINE]))
    out.append("End")
    return "\n".join(out) + "\n"


@dataclass
class ParsedLP:
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)

    def matrix(self) -> dict[tuple[str, str], float]:
        """Sparse constraint matrix keyed by (row label, variable)."""
        out = {}
        for row in self.rows:
            for name, coef in row.terms:
                out[(row.label, name)] = out.get((row.label, name), 0.0) + coef
        return out


def _parse_terms(tokens: list[str]) -> tuple[tuple[str, float], ...]:
    terms = []
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        terms.append((tok, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    return tuple(terms)


def parse_text(text: str) -> ParsedLP:
    lp = ParsedLP()
    section = None
    pending: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            tokens = line.split()
            if tokens[0].endswith(":"):
                tokens = tokens[1:]
            for name, coef in _parse_terms(tokens):
                lp.objective[name] = lp.objective.get(name, 0.0) + coef
        elif section == "subject to":
            pending += line.split()
            for sense in ("<=", ">=", "="):
                if len(pending) >= 2 and pending[-2] == sense:
                    label = pending[0].rstrip(":")
                    lp.rows.append(Row(label, _parse_terms(pending[1:-2]), sense, float(pending[-1])))
                    pending = []
                    break
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 3 and parts[1] == "=":
                lp.bounds[parts[0]] = (float(parts[2]), float(parts[2]))
            elif len(parts) == 5:
                lp.bounds[parts[2]] = (float(parts[0]), float(parts[4]))
            else:
                raise ValueError(f"unsupported bound line: {line!r}")
        elif section == "binaries":
            lp.binaries += line.split()
    if pending:
        raise ValueError(f"unterminated constraint: {' '.join(pending)}")
    return lp
