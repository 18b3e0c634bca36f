"""
Scalar expression language for metric, frame and curve components.

Binding, strongest first: calls and parentheses, ``^`` (right-associative),
unary minus, ``*`` and ``/``, ``+`` and ``-``. Expressions compile to numpy
callables that evaluate a whole batch of points at once, and they can be
differentiated symbolically.
"""
import re
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Union

import numpy as np

from errors import ExpressionError

FUNCTIONS = {
    'sin': np.sin,
    'cos': np.cos,
    'tan': np.tan,
    'exp': np.exp,
    'log': np.log,
    'sqrt': np.sqrt,
    'cosh': np.cosh,
    'sinh': np.sinh,
}

# Names accepted when the caller does not declare a chart: x1..xN, s, t and
# the short aliases x, y, z.
RESERVED_VARIABLES = ('x', 'y', 'z', 's', 't')
_INDEXED_VARIABLE = re.compile(r'x[1-9][0-9]*\Z')

Compiled = Callable[[np.ndarray], np.ndarray]


class Expr:
    """Base node of an expression tree."""

    def compile(self, index: Dict[str, int]) -> Compiled:
        raise NotImplementedError

    def diff(self, name: str) -> 'Expr':
        raise NotImplementedError

    def variables(self) -> Set[str]:
        raise NotImplementedError

    def is_constant(self) -> bool:
        return not self.variables()

    def evaluate(self, env: Dict[str, float]) -> float:
        """
        Evaluate at a single point.

        Args:
            env: Mapping from variable name to value

        Returns:
            The finite value of the expression
        """
        names = sorted(env)
        missing = self.variables() - set(names)
        if missing:
            raise ExpressionError(f"no value bound for {', '.join(sorted(missing))}")
        index = {name: i for i, name in enumerate(names)}
        point = np.array([float(env[name]) for name in names])
        with np.errstate(all='ignore'):
            value = float(self.compile(index)(point))
        if not np.isfinite(value):
            raise ExpressionError(f"'{self}' does not evaluate to a finite number at {env}")
        return value


@dataclass(frozen=True)
class Number(Expr):
    value: float

    def compile(self, index):
        value = np.float64(self.value)
        return lambda X: value

    def diff(self, name):
        return ZERO

    def variables(self):
        return set()

    def __str__(self):
        value = self.value
        if value.is_integer() and abs(value) < 1e15:
            text = str(int(value))
        else:
            text = repr(value)
        return f"({text})" if value < 0 else text


@dataclass(frozen=True)
class Variable(Expr):
    name: str

    def compile(self, index):
        if self.name not in index:
            raise ExpressionError(f"unknown identifier '{self.name}'")
        column = index[self.name]
        return lambda X: X[..., column]

    def diff(self, name):
        return ONE if name == self.name else ZERO

    def variables(self):
        return {self.name}

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Negate(Expr):
    operand: Expr

    def compile(self, index):
        inner = self.operand.compile(index)
        return lambda X: -inner(X)

    def diff(self, name):
        return negate(self.operand.diff(name))

    def variables(self):
        return self.operand.variables()

    def __str__(self):
        return f"(-{self.operand})"


_ARITHMETIC = {
    '+': np.add,
    '-': np.subtract,
    '*': np.multiply,
    '/': np.divide,
}


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr

    def compile(self, index):
        left = self.left.compile(index)
        if self.op == '^':
            if isinstance(self.right, Number) and self.right.value.is_integer():
                exponent = int(self.right.value)
                return lambda X: left(X) ** exponent
            right = self.right.compile(index)
            return lambda X: np.power(left(X), right(X))
        right = self.right.compile(index)
        operation = _ARITHMETIC[self.op]
        return lambda X: operation(left(X), right(X))

    def diff(self, name):
        left, right = self.left, self.right
        d_left, d_right = left.diff(name), right.diff(name)
        if self.op == '+':
            return add(d_left, d_right)
        if self.op == '-':
            return sub(d_left, d_right)
        if self.op == '*':
            return add(mul(d_left, right), mul(left, d_right))
        if self.op == '/':
            return sub(div(d_left, right), div(mul(left, d_right), power(right, TWO)))
        if right.is_constant():
            return mul(mul(right, power(left, sub(right, ONE))), d_left)
        return mul(self, add(mul(d_right, call('log', left)), div(mul(right, d_left), left)))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Expr):
    function: str
    argument: Expr

    def compile(self, index):
        function = FUNCTIONS[self.function]
        argument = self.argument.compile(index)
        return lambda X: function(argument(X))

    def diff(self, name):
        return mul(_outer_derivative(self.function, self.argument), self.argument.diff(name))

    def variables(self):
        return self.argument.variables()

    def __str__(self):
        return f"{self.function}({self.argument})"


ZERO = Number(0.0)
ONE = Number(1.0)
TWO = Number(2.0)


def _fold(op: str, a: Expr, b: Expr) -> Optional[Expr]:
    if not (isinstance(a, Number) and isinstance(b, Number)):
        return None
    with np.errstate(all='ignore'):
        if op == '^':
            value = float(np.power(a.value, b.value))
        else:
            value = float(_ARITHMETIC[op](a.value, b.value))
    return Number(value) if np.isfinite(value) else None


def add(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return _fold('+', a, b) or BinaryOp('+', a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return a
    if a == ZERO:
        return negate(b)
    return _fold('-', a, b) or BinaryOp('-', a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return _fold('*', a, b) or BinaryOp('*', a, b)


def div(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return _fold('/', a, b) or BinaryOp('/', a, b)


def power(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return ONE
    if b == ONE:
        return a
    return _fold('^', a, b) or BinaryOp('^', a, b)


def negate(a: Expr) -> Expr:
    if isinstance(a, Number):
        return Number(-a.value)
    if isinstance(a, Negate):
        return a.operand
    return Negate(a)


def call(function: str, argument: Expr) -> Expr:
    return Call(function, argument)


def _outer_derivative(function: str, u: Expr) -> Expr:
    if function == 'sin':
        return call('cos', u)
    if function == 'cos':
        return negate(call('sin', u))
    if function == 'tan':
        return div(ONE, power(call('cos', u), TWO))
    if function == 'exp':
        return call('exp', u)
    if function == 'log':
        return div(ONE, u)
    if function == 'sqrt':
        return div(ONE, mul(TWO, call('sqrt', u)))
    if function == 'cosh':
        return call('sinh', u)
    return call('cosh', u)


class _Token(NamedTuple):
    kind: str
    text: str
    position: int


_TOKEN = re.compile(r"""
    (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
   |(?P<name>[A-Za-z_][A-Za-z_0-9]*)
   |(?P<op>\*\*|[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    position = 0
    while position < len(text):
        if text[position].isspace():
            position += 1
            continue
        match = _TOKEN.match(text, position)
        if match is None:
            raise ExpressionError(
                f"syntax error at offset {position}: unexpected character '{text[position]}'", position)
        tokens.append(_Token(match.lastgroup, match.group(), position))
        position = match.end()
    tokens.append(_Token('end', '', len(text)))
    return tokens


class _Parser:
    """Top-down operator precedence parser over a token list."""

    BINDING = {'+': 10, '-': 10, '*': 20, '/': 20, '^': 30, '**': 30}
    UNARY = 25

    def __init__(self, text: str, is_variable: Callable[[str], bool]):
        self.tokens = _tokenize(text)
        self.index = 0
        self.is_variable = is_variable

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def binding(self, token: _Token) -> int:
        if token.kind != 'op':
            return 0
        return self.BINDING.get(token.text, 0)

    def parse(self) -> Expr:
        tree = self.expression(0)
        if self.current.kind != 'end':
            self.fail(self.current, f"unexpected '{self.current.text}'")
        return tree

    def expression(self, rbp: int) -> Expr:
        left = self.nud(self.advance())
        while rbp < self.binding(self.current):
            left = self.led(self.advance(), left)
        return left

    def nud(self, token: _Token) -> Expr:
        if token.kind == 'number':
            return Number(float(token.text))
        if token.kind == 'name':
            if token.text in FUNCTIONS:
                if self.current.text != '(':
                    self.fail(token, f"function '{token.text}' needs a parenthesised argument")
                self.advance()
                argument = self.expression(0)
                self.expect(')')
                return Call(token.text, argument)
            if not self.is_variable(token.text):
                raise ExpressionError(
                    f"unknown identifier '{token.text}' at offset {token.position}", token.position)
            return Variable(token.text)
        if token.text == '(':
            inner = self.expression(0)
            self.expect(')')
            return inner
        if token.text == '-':
            return Negate(self.expression(self.UNARY))
        if token.text == '+':
            return self.expression(self.UNARY)
        if token.kind == 'end':
            self.fail(token, "unexpected end of input")
        self.fail(token, f"unexpected '{token.text}'")

    def led(self, token: _Token, left: Expr) -> Expr:
        if token.text in ('^', '**'):
            # right associative: 2^3^2 == 2^(3^2)
            return BinaryOp('^', left, self.expression(self.BINDING['^'] - 1))
        return BinaryOp(token.text, left, self.expression(self.BINDING[token.text]))

    def expect(self, text: str):
        token = self.advance()
        if token.text != text:
            self.fail(token, f"expected '{text}'")

    def fail(self, token: _Token, detail: str):
        raise ExpressionError(f"syntax error at offset {token.position}: {detail}", token.position)


def _default_variable(name: str) -> bool:
    return name in RESERVED_VARIABLES or bool(_INDEXED_VARIABLE.match(name))


def parse_expr(text: str, variables: Optional[Iterable[str]] = None) -> Expr:
    """
    Parse a scalar expression.

    Args:
        text: Source text, e.g. "1 + y^2"
        variables: Names allowed as variables; defaults to x1..xN, x, y, z, s, t

    Returns:
        The expression tree
    """
    if variables is None:
        is_variable = _default_variable
    else:
        allowed = set(variables)
        is_variable = allowed.__contains__
    return _Parser(text, is_variable).parse()


def as_expr(value: Union[str, float, int, Expr], variables: Optional[Iterable[str]] = None) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Number(float(value))
    if isinstance(value, str):
        return parse_expr(value, variables)
    raise ExpressionError(f"cannot read {value!r} as an expression")


def compile_array(exprs: Sequence[Expr], index: Dict[str, int]) -> Compiled:
    """
    Compile a flat list of expressions into one batched evaluator.

    The returned function maps an array of shape (..., k) of variable values to
    an array of shape (..., len(exprs)). Non-finite entries are left in place
    for the caller to report.
    """
    constants = np.array([expr.value if isinstance(expr, Number) else 0.0 for expr in exprs])
    # identical subtrees (symmetric metric entries, repeated derivatives) are evaluated once
    first_seen: Dict[Expr, int] = {}
    active = []
    copies = []
    for position, expr in enumerate(exprs):
        if isinstance(expr, Number):
            continue
        if expr in first_seen:
            copies.append((position, first_seen[expr]))
        else:
            first_seen[expr] = position
            active.append((position, expr.compile(index)))

    def evaluate(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[:-1] + (len(constants),))
        out[...] = constants
        with np.errstate(all='ignore'):
            for position, function in active:
                out[..., position] = function(X)
        for position, source in copies:
            out[..., position] = out[..., source]
        return out

    return evaluate
