"""Sparse multivariate polynomial algebra over affine coefficient expressions.

A polynomial is a dictionary mapping exponent tuples to coefficients.  A
coefficient is an :class:`AffineExpr`, an affine combination of scalar
decision variables (integer ids) plus a constant; concrete polynomials are
the special case with no decision variables.  Keeping coefficients affine in
the decision variables is what lets barrier and multiplier templates flow
through differentiation and set-constraint encodings and come out the other
end as *linear* conic data.  Products of two decision-variable-bearing
objects are therefore a hard error (:class:`BilinearProduct`), never a
silent quadratic term.

Monomial order is graded lexicographic throughout: ascending total degree,
ties broken by descending lexicographic comparison of the exponent tuples.
For n=2 that reads 1, x1, x2, x1^2, x1*x2, x2^2, ...  The same order is used
for basis generation, coefficient serialization, and Gram indexing so that
runs are reproducible.

Values are immutable after construction and safe to share across threads;
arithmetic returns new objects.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

# Terms whose coefficient magnitude falls below this after arithmetic are
# pruned to preserve sparsity.  Override per call where it matters.
PRUNE_TOL = 1e-14

Exponents = tuple[int, ...]


class BilinearProduct(ValueError):
    """Raised when a product would be quadratic in decision variables."""


class MissingAssignment(LookupError):
    """Raised when evaluation hits a decision variable with no value."""


def grlex_key(exponents: Exponents) -> tuple:
    """Sort key realizing the graded lexicographic order."""
    return (sum(exponents), tuple(-e for e in exponents))


def monomial_basis(n: int, d: int) -> list[Exponents]:
    """All exponent tuples of total degree <= d in n variables, graded-lex.

    The count is C(n+d, d).
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if d < 0:
        raise ValueError(f"degree must be >= 0, got {d}")
    basis: list[Exponents] = []

    def fill(prefix: list[int], remaining_vars: int, budget: int) -> None:
        if remaining_vars == 1:
            basis.append(tuple(prefix + [budget]))
            return
        for e in range(budget, -1, -1):
            fill(prefix + [e], remaining_vars - 1, budget - e)

    for total in range(d + 1):
        fill([], n, total)
    return basis


class AffineExpr:
    """constant + sum(coeff_i * var_i) over scalar decision variables."""

    __slots__ = ("const", "lin")

    def __init__(self, const: float = 0.0, lin: Mapping[int, float] | None = None):
        self.const = float(const)
        self.lin: dict[int, float] = {v: float(c) for v, c in (lin or {}).items() if c != 0.0}

    @classmethod
    def constant(cls, value: float) -> "AffineExpr":
        return cls(value)

    @classmethod
    def variable(cls, var_id: int, coeff: float = 1.0) -> "AffineExpr":
        return cls(0.0, {var_id: coeff})

    def is_constant(self) -> bool:
        return not self.lin

    def is_negligible(self, tol: float = PRUNE_TOL) -> bool:
        return abs(self.const) < tol and all(abs(c) < tol for c in self.lin.values())

    def variables(self) -> set[int]:
        return set(self.lin)

    def __add__(self, other: "AffineExpr | float") -> "AffineExpr":
        if not isinstance(other, AffineExpr):
            return AffineExpr(self.const + other, self.lin)
        lin = dict(self.lin)
        for v, c in other.lin.items():
            lin[v] = lin.get(v, 0.0) + c
        return AffineExpr(self.const + other.const, lin)

    __radd__ = __add__

    def __neg__(self) -> "AffineExpr":
        return AffineExpr(-self.const, {v: -c for v, c in self.lin.items()})

    def __sub__(self, other: "AffineExpr | float") -> "AffineExpr":
        return self + (-other if isinstance(other, AffineExpr) else -other)

    def __mul__(self, other: "AffineExpr | float") -> "AffineExpr":
        if isinstance(other, AffineExpr):
            if self.lin and other.lin:
                raise BilinearProduct(
                    "product of two decision-variable expressions is not affine"
                )
            if other.lin:
                self, other = other, self
            other = other.const
        return AffineExpr(self.const * other, {v: c * other for v, c in self.lin.items()})

    __rmul__ = __mul__

    def evaluate(self, assignment: Mapping[int, float] | None = None) -> float:
        total = self.const
        for v, c in self.lin.items():
            if assignment is None or v not in assignment:
                raise MissingAssignment(f"decision variable {v} has no assigned value")
            total += c * assignment[v]
        return total

    def substitute(self, assignment: Mapping[int, float]) -> "AffineExpr":
        """Replace assigned variables by values; others stay symbolic."""
        const = self.const
        lin: dict[int, float] = {}
        for v, c in self.lin.items():
            if v in assignment:
                const += c * assignment[v]
            else:
                lin[v] = c
        return AffineExpr(const, lin)

    def prune(self, tol: float = PRUNE_TOL) -> "AffineExpr":
        return AffineExpr(
            self.const if abs(self.const) >= tol else 0.0,
            {v: c for v, c in self.lin.items() if abs(c) >= tol},
        )

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, AffineExpr)
            and self.const == other.const
            and self.lin == other.lin
        )

    def __hash__(self):
        return hash((self.const, tuple(sorted(self.lin.items()))))

    def __repr__(self) -> str:
        parts = [repr(self.const)] if self.const or not self.lin else []
        parts += [f"{c!r}*v{v}" for v, c in sorted(self.lin.items())]
        return " + ".join(parts) if parts else "0.0"


def _as_affine(value: "AffineExpr | float") -> AffineExpr:
    return value if isinstance(value, AffineExpr) else AffineExpr(float(value))


class ParametricPolynomial:
    """Sparse polynomial in n variables with AffineExpr coefficients."""

    __slots__ = ("n", "terms")

    def __init__(
        self,
        n: int,
        terms: Mapping[Exponents, "AffineExpr | float"] | None = None,
        *,
        tol: float = PRUNE_TOL,
    ):
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        self.n = n
        canonical: dict[Exponents, AffineExpr] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise ValueError(f"exponent tuple {exps} has length != {n}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            aff = _as_affine(coeff).prune(tol)
            if not aff.is_negligible(tol):
                canonical[exps] = aff
        self.terms = canonical

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "ParametricPolynomial":
        return cls(n)

    @classmethod
    def constant(cls, n: int, value: "AffineExpr | float") -> "ParametricPolynomial":
        return cls(n, {(0,) * n: value})

    @classmethod
    def variable(cls, n: int, index: int) -> "ParametricPolynomial":
        if not 0 <= index < n:
            raise ValueError(f"variable index {index} out of range for n={n}")
        exps = [0] * n
        exps[index] = 1
        return cls(n, {tuple(exps): 1.0})

    @classmethod
    def monomial(
        cls, n: int, exps: Sequence[int], coeff: "AffineExpr | float" = 1.0
    ) -> "ParametricPolynomial":
        return cls(n, {tuple(exps): coeff})

    # -- structure ---------------------------------------------------------

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_concrete(self) -> bool:
        return all(c.is_constant() for c in self.terms.values())

    def decision_variables(self) -> set[int]:
        out: set[int] = set()
        for c in self.terms.values():
            out |= c.variables()
        return out

    def coefficient(self, exps: Sequence[int]) -> AffineExpr:
        return self.terms.get(tuple(exps), AffineExpr(0.0))

    def sorted_terms(self) -> list[tuple[Exponents, AffineExpr]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))

    # -- arithmetic ---------------------------------------------------------

    def _check_dim(self, other: "ParametricPolynomial") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def add(self, other: "ParametricPolynomial") -> "ParametricPolynomial":
        self._check_dim(other)
        acc: dict[Exponents, AffineExpr] = dict(self.terms)
        for e, c in other.terms.items():
            cur = acc.get(e)
            acc[e] = c if cur is None else cur + c
        return ParametricPolynomial(self.n, acc)

    def __add__(self, other: "ParametricPolynomial") -> "ParametricPolynomial":
        return self.add(other)

    def sub(self, other: "ParametricPolynomial") -> "ParametricPolynomial":
        return self.add(other.scale(-1.0))

    def __sub__(self, other: "ParametricPolynomial") -> "ParametricPolynomial":
        return self.sub(other)

    def scale(self, factor: "AffineExpr | float") -> "ParametricPolynomial":
        factor = _as_affine(factor)
        return ParametricPolynomial(
            self.n, {e: c * factor for e, c in self.terms.items()}
        )

    def multiply(self, other: "ParametricPolynomial") -> "ParametricPolynomial":
        self._check_dim(other)
        if not self.is_concrete() and not other.is_concrete():
            raise BilinearProduct(
                "product of two decision-variable-bearing polynomials"
            )
        acc: dict[Exponents, AffineExpr] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                prod = c1 * c2
                cur = acc.get(e)
                acc[e] = prod if cur is None else cur + prod
        return ParametricPolynomial(self.n, acc)

    def __mul__(self, other: "ParametricPolynomial") -> "ParametricPolynomial":
        return self.multiply(other)

    def differentiate(self, index: int) -> "ParametricPolynomial":
        """Exact partial derivative with respect to variable `index`."""
        if not 0 <= index < self.n:
            raise ValueError(f"variable index {index} out of range for n={self.n}")
        acc: dict[Exponents, AffineExpr] = {}
        for e, c in self.terms.items():
            k = e[index]
            if k == 0:
                continue
            de = list(e)
            de[index] = k - 1
            acc[tuple(de)] = c * float(k)
        return ParametricPolynomial(self.n, acc)

    # -- evaluation ---------------------------------------------------------

    def evaluate(
        self,
        x: Sequence[float],
        assignment: Mapping[int, float] | None = None,
    ) -> float:
        """Evaluate at a state point, resolving decision variables via `assignment`."""
        if len(x) != self.n:
            raise ValueError(f"point has length {len(x)}, expected {self.n}")
        total = 0.0
        for e, c in self.terms.items():
            mono = 1.0
            for xi, ei in zip(x, e):
                if ei:
                    mono *= xi**ei
            total += c.evaluate(assignment) * mono
        return total

    def evaluate_affine(self, x: Sequence[float]) -> AffineExpr:
        """Evaluate at a state point, leaving decision variables symbolic."""
        if len(x) != self.n:
            raise ValueError(f"point has length {len(x)}, expected {self.n}")
        out = AffineExpr(0.0)
        for e, c in self.terms.items():
            mono = 1.0
            for xi, ei in zip(x, e):
                if ei:
                    mono *= xi**ei
            out = out + c * mono
        return out

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation of a concrete polynomial at an (N, n) array."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ValueError(f"expected points of shape (N, {self.n})")
        out = np.zeros(pts.shape[0])
        if not self.terms:
            return out
        max_exp = [max(e[i] for e in self.terms) for i in range(self.n)]
        powers: list[list[np.ndarray]] = []
        for i in range(self.n):
            col = [np.ones(pts.shape[0])]
            for _ in range(max_exp[i]):
                col.append(col[-1] * pts[:, i])
            powers.append(col)
        for e, c in self.terms.items():
            term = np.full(pts.shape[0], c.evaluate(None))
            for i, ei in enumerate(e):
                if ei:
                    term = term * powers[i][ei]
            out += term
        return out

    def substitute(self, assignment: Mapping[int, float]) -> "ParametricPolynomial":
        """Resolve decision variables to values, producing a concrete polynomial."""
        return ParametricPolynomial(
            self.n, {e: c.substitute(assignment) for e, c in self.terms.items()}
        )

    # -- comparison / display ------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ParametricPolynomial)
            and self.n == other.n
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.terms.items(), key=lambda t: t[0]))))

    def allclose(self, other: "ParametricPolynomial", tol: float = 1e-9) -> bool:
        """Coefficient-map equality up to `tol`, for float-safe comparisons."""
        if self.n != other.n:
            return False
        for e in set(self.terms) | set(other.terms):
            a = self.terms.get(e, AffineExpr(0.0))
            b = other.terms.get(e, AffineExpr(0.0))
            if not (a - b).is_negligible(tol):
                return False
        return True

    def __repr__(self) -> str:
        return f"ParametricPolynomial({self.n}, {format_polynomial(self)!r})"


def axis_scaled(p: ParametricPolynomial, scales: Sequence[float]) -> ParametricPolynomial:
    """Substitute x_i -> scales_i * x_i.

    Exact per-term coefficient scaling (no cross-term expansion), so it is
    its own inverse under reciprocal scales up to float rounding.
    """
    if len(scales) != p.n:
        raise ValueError(f"expected {p.n} scale factors, got {len(scales)}")
    terms: dict[Exponents, AffineExpr] = {}
    for e, c in p.terms.items():
        factor = 1.0
        for s, ei in zip(scales, e):
            if ei:
                factor *= s**ei
        terms[e] = c * factor
    return ParametricPolynomial(p.n, terms)


def format_polynomial(p: ParametricPolynomial, var_prefix: str = "x") -> str:
    """Human-readable rendering using the x1..xN text grammar."""
    if p.is_zero():
        return "0"
    chunks: list[str] = []
    for e, c in p.sorted_terms():
        factors = [
            f"{var_prefix}{i + 1}" + (f"^{ei}" if ei > 1 else "")
            for i, ei in enumerate(e)
            if ei
        ]
        if c.is_constant():
            coeff = c.const
            if not factors:
                body = repr(coeff)
            elif coeff == 1.0:
                body = "*".join(factors)
            elif coeff == -1.0:
                body = "-" + "*".join(factors)
            else:
                body = "*".join([repr(coeff)] + factors)
        else:
            body = "(" + repr(c) + ")" + ("*" + "*".join(factors) if factors else "")
        if chunks and not body.startswith("-"):
            chunks.append("+ " + body)
        elif chunks:
            chunks.append("- " + body[1:])
        else:
            chunks.append(body)
    return " ".join(chunks)


# ---------------------------------------------------------------------------
# Text grammar
#
#   expr   := term (('+' | '-') term)*
#   term   := unary ('*' unary)*
#   unary  := ('+' | '-')* power
#   power  := atom ('^' INTEGER)?
#   atom   := NUMBER | VARIABLE | '(' expr ')'
#
# Variables are x1..xN.  NUMBER is a decimal literal with optional exponent.
# '^' takes a non-negative integer literal.  Implicit multiplication (e.g.
# "2x1") is rejected.
# ---------------------------------------------------------------------------


class PolyParseError(ValueError):
    """Syntax or range error in the polynomial text grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at column {position + 1})")
        self.position = position


_TOKEN_SPEC = [
    ("num", r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"),
    ("var", r"x\d+"),
    ("op", r"[-+*^()]"),
    ("ws", r"\s+"),
]

import re as _re

_TOKEN_RE = _re.compile("|".join(f"(?P<{name}>{pat})" for name, pat in _TOKEN_SPEC))


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PolyParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise PolyParseError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def parse(self) -> ParametricPolynomial:
        p = self.expr()
        tok = self.peek()
        if tok is not None:
            raise PolyParseError(f"unexpected {tok[1]!r}", tok[2])
        return p

    def expr(self) -> ParametricPolynomial:
        p = self.term()
        while True:
            tok = self.peek()
            if tok is None or tok[1] not in "+-":
                return p
            self.take()
            q = self.term()
            p = p.add(q) if tok[1] == "+" else p.sub(q)

    def term(self) -> ParametricPolynomial:
        p = self.unary()
        while True:
            tok = self.peek()
            if tok is None or tok[1] != "*":
                return p
            self.take()
            p = p.multiply(self.unary())

    def unary(self) -> ParametricPolynomial:
        sign = 1.0
        while True:
            tok = self.peek()
            if tok is not None and tok[1] in "+-":
                self.take()
                if tok[1] == "-":
                    sign = -sign
            else:
                break
        p = self.power()
        return p.scale(sign) if sign < 0 else p

    def power(self) -> ParametricPolynomial:
        base = self.atom()
        tok = self.peek()
        if tok is None or tok[1] != "^":
            return base
        self.take()
        etok = self.peek()
        if etok is None or etok[0] != "num" or not etok[1].isdigit():
            pos = etok[2] if etok else len(self.text)
            raise PolyParseError("'^' requires a non-negative integer literal", pos)
        self.take()
        exponent = int(etok[1])
        out = ParametricPolynomial.constant(self.n, 1.0)
        for _ in range(exponent):
            out = out.multiply(base)
        return out

    def atom(self) -> ParametricPolynomial:
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return ParametricPolynomial.constant(self.n, float(text))
        if kind == "var":
            index = int(text[1:])
            if not 1 <= index <= self.n:
                raise PolyParseError(
                    f"variable {text} out of range for dimension {self.n}", pos
                )
            return ParametricPolynomial.variable(self.n, index - 1)
        if text == "(":
            p = self.expr()
            closing = self.peek()
            if closing is None or closing[1] != ")":
                raise PolyParseError("missing ')'", closing[2] if closing else len(self.text))
            self.take()
            return p
        raise PolyParseError(f"unexpected {text!r}", pos)


def parse_polynomial(text: str, n: int) -> ParametricPolynomial:
    """Parse the x1..xN text grammar into a concrete polynomial."""
    return _Parser(text, n).parse()
