"""
LP-format text writer and reader for ModelSpec

The writer emits the subset of the LP format used here: a comment header
carrying the build parameters, Minimize/Maximize, Subject To (with the F1
constraint in bracketed quadratic syntax), Bounds, General, Binary, End.
Coefficients that are integers are written as integers, others with 17
significant digits; the reader maps them back to rationals with
denominators up to 10^9.
"""
import os
import re
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from loguru import logger

from src.ruletree.exceptions import ModelBuildError
from src.ruletree.mip.model_spec import ModelSpec, Sense, VarType

LP_MAGIC = "ruletree"
TERMS_PER_LINE = 8
MAX_DENOMINATOR = 10 ** 9
_SENSES = {"<=": Sense.LE, "=<": Sense.LE, "<": Sense.LE, ">=": Sense.GE, "=>": Sense.GE, ">": Sense.GE, "=": Sense.EQ}
_SECTIONS = {
    "minimize": "objective", "minimise": "objective", "min": "objective",
    "maximize": "objective", "maximise": "objective", "max": "objective",
    "subject to": "constraints", "such that": "constraints", "st": "constraints", "s.t.": "constraints",
    "bounds": "bounds", "general": "general", "generals": "general", "gen": "general",
    "binary": "binary", "binaries": "binary", "bin": "binary", "end": "end",
}


def format_number(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return format(float(value), ".17g")


def parse_number(token: str) -> Fraction:
    value = Fraction(token)
    if value.denominator > MAX_DENOMINATOR:
        value = value.limit_denominator(MAX_DENOMINATOR)
    return value


def _signed(coef: Fraction, body: str, first: bool) -> str:
    sign = "-" if coef < 0 else "+"
    magnitude = abs(coef)
    text = body if magnitude == 1 else f"{format_number(magnitude)} {body}"
    if first:
        return f"- {text}" if coef < 0 else text
    return f"{sign} {text}"


def _wrap(pieces: List[str]) -> List[str]:
    lines = []
    for start in range(0, max(len(pieces), 1), TERMS_PER_LINE):
        lines.append("   " + " ".join(pieces[start:start + TERMS_PER_LINE]))
    return lines


def _linear_pieces(terms, constant: Fraction = Fraction(0)) -> List[str]:
    pieces = []
    if constant != 0:
        pieces.append(format_number(constant))
    for name, coef in terms:
        pieces.append(_signed(coef, name, not pieces))
    return pieces or ["0"]


def dumps_lp(model: ModelSpec) -> str:
    """Render a model as LP text; identical models give identical text"""
    lines: List[str] = []
    meta = " ".join(f"{k}={v}" for k, v in model.meta.items())
    lines.append(f"\\ {LP_MAGIC} {meta}".rstrip())
    lines.append("Maximize" if model.objective.sense == "max" else "Minimize")
    pieces = _linear_pieces(model.objective.terms, model.objective.constant)
    pieces[0] = f"obj: {pieces[0]}"
    lines.extend(_wrap(pieces))

    lines.append("Subject To")
    for constraint in model.constraints:
        pieces = _linear_pieces(constraint.terms)
        pieces[0] = f"{constraint.name}: {pieces[0]}"
        pieces.append(f"{constraint.sense.value} {format_number(constraint.rhs)}")
        lines.extend(_wrap(pieces))
    for constraint in model.quadratic:
        pieces = _linear_pieces(constraint.terms)
        pieces[0] = f"{constraint.name}: {pieces[0]}"
        quad = [_signed(c, f"{x} * {y}", i == 0) for i, (x, y, c) in enumerate(constraint.quad_terms)]
        pieces.append("+ [")
        pieces.extend(quad)
        pieces.append("]")
        pieces.append(f"{constraint.sense.value} {format_number(constraint.rhs)}")
        lines.extend(_wrap(pieces))

    lines.append("Bounds")
    for var in model.variables.values():
        if var.vtype == VarType.BINARY:
            continue
        upper = "+inf" if var.ub is None else format_number(var.ub)
        lines.append(f"   {format_number(var.lb)} <= {var.name} <= {upper}")

    generals = [v.name for v in model.variables.values() if v.vtype == VarType.INTEGER]
    if generals:
        lines.append("General")
        lines.extend(_wrap(generals))
    binaries = [v.name for v in model.variables.values() if v.vtype == VarType.BINARY]
    if binaries:
        lines.append("Binary")
        lines.extend(_wrap(binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def emit_lp(model: ModelSpec, path: str) -> None:
    """
    Write a model in LP format

    Args:
        model: Built model
        path: Output file path
    """
    text = dumps_lp(model)
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as e:
        logger.error(f"Cannot write LP file {path}: {e}")
        raise ModelBuildError(f"Cannot write LP file {path}: {e}") from e
    stats = model.stats()
    logger.info(
        f"LP written to {path}: {stats['vars_binary']} binary, {stats['vars_integer']} integer, "
        f"{stats['vars_continuous']} continuous variables, {stats['constraints'] + stats['quadratic']} constraints"
    )


def family_of(name: str) -> str:
    """Constraint family from its name (c5j_3_4_1 -> 5j, err_lo_4_0 -> err, qf1 -> f1)"""
    head = name.split("_")[0]
    if re.fullmatch(r"c5[a-p]", head):
        return head[1:]
    if head == "qf1":
        return "f1"
    return head


def _tokens(text: str) -> List[str]:
    text = re.sub(r"([\[\]*])", r" \1 ", text)
    text = re.sub(r"(<=|>=|=<|=>)", r" \1 ", text)
    text = re.sub(r"(?<![<>=])=(?![<>=])", " = ", text)
    return text.split()


def _is_number(token: str) -> bool:
    try:
        Fraction(token)
    except (ValueError, ZeroDivisionError):
        return False
    return True


def _parse_expression(tokens: List[str]) -> Tuple[List[Tuple[str, Fraction]], List[Tuple[str, str, Fraction]], Fraction]:
    """Linear terms, bilinear terms and constant of a token list without sense/rhs"""
    linear: List[Tuple[str, Fraction]] = []
    quad: List[Tuple[str, str, Fraction]] = []
    constant = Fraction(0)
    sign = Fraction(1)
    coef: Optional[Fraction] = None
    in_bracket = False
    bracket_sign = Fraction(1)
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in ("+", "-"):
            if coef is not None:
                constant += sign * coef * (bracket_sign if in_bracket else 1)
                coef = None
            sign = Fraction(-1) if tok == "-" else Fraction(1)
        elif tok == "[":
            in_bracket, bracket_sign, sign = True, sign, Fraction(1)
        elif tok == "]":
            in_bracket, sign = False, Fraction(1)
        elif _is_number(tok):
            coef = parse_number(tok) if coef is None else coef * parse_number(tok)
        else:
            value = sign * (Fraction(1) if coef is None else coef)
            if i + 2 < len(tokens) and tokens[i + 1] == "*":
                quad.append((tok, tokens[i + 2], value * bracket_sign))
                i += 2
            else:
                linear.append((tok, value))
            coef, sign = None, Fraction(1)
        i += 1
    if coef is not None:
        constant += sign * coef
    return linear, quad, constant


def _split_sections(text: str) -> Dict[str, List[str]]:
    sections: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        key = _SECTIONS.get(line.lower())
        if key is not None:
            current = key
            sections.setdefault(key, [])
            if key == "objective":
                sections["sense"] = ["max" if line.lower().startswith("max") else "min"]
            continue
        if current is None:
            raise ModelBuildError(f"LP text outside any section: {line!r}")
        sections[current].append(line)
    return sections


def read_lp(path_or_text: str) -> ModelSpec:
    """
    Parse LP text written by emit_lp back into a ModelSpec

    Args:
        path_or_text: Path of an LP file, or the LP text itself

    Returns:
        ModelSpec with the same variables, constraints and objective
    """
    if "\n" not in path_or_text and os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as handle:
            text = handle.read()
    else:
        text = path_or_text

    model = ModelSpec()
    for raw in text.splitlines():
        if raw.startswith(f"\\ {LP_MAGIC}"):
            for item in raw.split()[2:]:
                key, _, value = item.partition("=")
                model.meta[key] = value
            break

    sections = _split_sections(text)
    if "objective" not in sections or "constraints" not in sections:
        raise ModelBuildError("LP text lacks an objective or a Subject To section")

    # declare variables first: bounds, general, binary
    binaries = " ".join(sections.get("binary", [])).split()
    generals = " ".join(sections.get("general", [])).split()
    bounds: Dict[str, Tuple[Fraction, Optional[Fraction]]] = {}
    for line in sections.get("bounds", []):
        match = re.fullmatch(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)", line)
        if not match:
            raise ModelBuildError(f"Unsupported bound line {line!r}")
        lower, name, upper = match.groups()
        bounds[name] = (parse_number(lower), None if upper in ("+inf", "inf", "+infinity") else parse_number(upper))
    for name, (lower, upper) in bounds.items():
        model.add_variable(name, VarType.INTEGER if name in generals else VarType.CONTINUOUS, lower, upper)
    for name in generals:
        if name not in model.variables:
            model.add_variable(name, VarType.INTEGER, 0, None)
    for name in binaries:
        model.add_variable(name, VarType.BINARY)

    obj_tokens = _tokens(" ".join(sections["objective"]))
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    linear, _, constant = _parse_expression(obj_tokens)
    model.set_objective(sections["sense"][0], linear, constant)

    tokens = _tokens(" ".join(sections["constraints"]))
    i = 0
    while i < len(tokens):
        if not tokens[i].endswith(":"):
            raise ModelBuildError(f"Expected a constraint name, got {tokens[i]!r}")
        name = tokens[i][:-1]
        j = i + 1
        while j < len(tokens) and tokens[j] not in _SENSES:
            j += 1
        if j + 1 >= len(tokens):
            raise ModelBuildError(f"Constraint {name} has no sense or right-hand side")
        linear, quad, constant = _parse_expression(tokens[i + 1:j])
        sense, rhs = _SENSES[tokens[j]], parse_number(tokens[j + 1]) - constant
        if quad:
            model.add_quadratic(name, family_of(name), linear, quad, sense, rhs)
        else:
            model.add_constraint(name, family_of(name), linear, sense, rhs)
        i = j + 2
    logger.debug(f"Read LP model with {len(model.variables)} variables and {len(model.all_constraints())} constraints")
    return model
