"""Closed-form bilinear symbols and a midpoint-rule oracle for their defining integrals."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MIN_ORACLE_NODES = 10


class SymbolKind(str, Enum):
    C1_SGN = "c1_sgn"
    C1_INDICATOR = "c1_indicator"
    GEN22 = "gen22_product"
    CIRCULAR = "circular"
    DOUBLE_COMMUTATOR = "double_commutator"
    CONSTANT = "constant"
    SEPARABLE_SGN = "separable_sgn"


class Adjoint(str, Enum):
    STAR1 = "star1"   # m(-x1 - x2, x2)
    STAR2 = "star2"   # m(x1, -x1 - x2)


# CLI names for the symbol families
CLI_KINDS = {
    'c1': SymbolKind.C1_SGN,
    'c1plus': SymbolKind.C1_INDICATOR,
    'gen22': SymbolKind.GEN22,
    'circular': SymbolKind.CIRCULAR,
}


def _scalar_or_array(value: np.ndarray, scalar: bool):
    if scalar:
        return np.asarray(value).item()
    return value


def _broadcast(*values: ArrayLike) -> Tuple[bool, Tuple[np.ndarray, ...]]:
    scalar = all(np.ndim(v) == 0 for v in values)
    arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
    return scalar, tuple(arrays)


def _c1(xi: np.ndarray, xi1: np.ndarray) -> np.ndarray:
    moving = xi1 != 0
    with np.errstate(divide='ignore', invalid='ignore'):
        alpha = np.where(moving, -xi / np.where(moving, xi1, 1.0), 0.0)
    crossing = moving & (alpha > 0.0) & (alpha < 1.0)
    # sign constant along the segment: evaluate at its midpoint
    out = np.sign(xi + 0.5 * xi1)
    out = np.where(crossing, np.sign(xi) * alpha + np.sign(xi + xi1) * (1.0 - alpha), out)
    return np.where(moving, out, np.sign(xi))


def eval_c1(xi: ArrayLike, xi1: ArrayLike) -> ArrayLike:
    """Integral over alpha in [0, 1] of sgn(xi + alpha * xi1), with sgn(0) = 0."""
    scalar, (xi, xi1) = _broadcast(xi, xi1)
    return _scalar_or_array(_c1(xi, xi1), scalar)


def eval_c1_indicator(xi: ArrayLike, xi1: ArrayLike) -> ArrayLike:
    """Integral over alpha in [0, 1] of 1_{R+}(xi + alpha * xi1), with 1_{R+}(0) = 1/2."""
    scalar, (xi, xi1) = _broadcast(xi, xi1)
    return _scalar_or_array(0.5 * (1.0 + _c1(xi, xi1)), scalar)


def eval_primitive(xi: ArrayLike, xi1: ArrayLike) -> ArrayLike:
    """Oriented integral of 1_{R+}(xi + alpha) over alpha between 0 and xi1."""
    scalar, (xi, xi1) = _broadcast(xi, xi1)
    forward = np.clip(xi + xi1, 0.0, np.maximum(xi1, 0.0))
    backward = -np.clip(xi, 0.0, np.maximum(-xi1, 0.0))
    return _scalar_or_array(np.where(xi1 >= 0, forward, backward), scalar)


def primitive_second_differences(xi: ArrayLike, xi1: ArrayLike,
                                 step: float = 1e-3) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """Undivided central second differences (xi xi, xi1 xi1, mixed) of eval_primitive.

    They vanish where the primitive is linear. Across xi = 0 the xi-direction
    difference is -step, across xi + xi1 = 0 it is +step, and the mixed
    difference picks up step / 2 across xi + xi1 = 0.
    """
    if not step > 0:
        raise ValueError(f"Invalid step={step}: must be positive")
    scalar, (xi, xi1) = _broadcast(xi, xi1)
    p = eval_primitive
    centre = p(xi, xi1)
    d_xx = p(xi + step, xi1) - 2.0 * centre + p(xi - step, xi1)
    d_yy = p(xi, xi1 + step) - 2.0 * centre + p(xi, xi1 - step)
    d_xy = 0.25 * (p(xi + step, xi1 + step) - p(xi + step, xi1 - step)
                   - p(xi - step, xi1 + step) + p(xi - step, xi1 - step))
    return (_scalar_or_array(d_xx, scalar), _scalar_or_array(d_yy, scalar),
            _scalar_or_array(d_xy, scalar))


def _require_nonzero(a: float, b: float) -> None:
    if a == 0 or b == 0:
        raise ValueError(f"Invalid symbol parameters a={a}, b={b}: must be nonzero")


def eval_gen22(a: float, b: float, xi: ArrayLike, xi1: ArrayLike) -> ArrayLike:
    _require_nonzero(a, b)
    scalar, (xi, xi1) = _broadcast(xi, xi1)
    return _scalar_or_array(_c1(xi, a * xi1) * _c1(xi, b * xi1), scalar)


def eval_circular(a: float, b: float, xi1: ArrayLike, xi2: ArrayLike) -> ArrayLike:
    """Product of first-commutator symbols with the two frequency roles exchanged."""
    _require_nonzero(a, b)
    scalar, (xi1, xi2) = _broadcast(xi1, xi2)
    return _scalar_or_array(_c1(xi1, b * xi2) * _c1(xi2, a * xi1), scalar)


@dataclass(frozen=True)
class FrequencyPoint:
    xi: float = 0.0
    xi1: float = 0.0
    xi2: Optional[float] = None

    def __post_init__(self):
        values = [self.xi, self.xi1] + ([] if self.xi2 is None else [self.xi2])
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"Invalid frequency point {self}: values must be finite")


@dataclass(frozen=True)
class SymbolDescriptor:
    """A bilinear symbol m(first, second), optionally composed with adjoint substitutions.

    first is the frequency of the first operator slot and second that of the
    second slot: (xi, xi1) for the commutator families, (xi1, xi2) for the
    circular one.
    """
    kind: SymbolKind
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    axis: int = 1
    adjoints: Tuple[Adjoint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'kind', SymbolKind(self.kind))
        object.__setattr__(self, 'adjoints', tuple(Adjoint(w) for w in self.adjoints))
        if self.kind in (SymbolKind.GEN22, SymbolKind.CIRCULAR):
            _require_nonzero(self.a, self.b)
        if self.kind is SymbolKind.SEPARABLE_SGN and self.axis not in (1, 2):
            raise ValueError(f"Invalid axis={self.axis}: must be 1 or 2")

    @property
    def formula(self) -> str:
        base = {
            SymbolKind.C1_SGN: "int_0^1 sgn(xi + alpha xi1) dalpha",
            SymbolKind.C1_INDICATOR: "int_0^1 1_R+(xi + alpha xi1) dalpha",
            SymbolKind.GEN22: (f"int_0^1 sgn(xi + alpha*{self.a:g}*xi1) dalpha"
                               f" * int_0^1 sgn(xi + alpha*{self.b:g}*xi1) dalpha"),
            SymbolKind.CIRCULAR: (f"int_0^1 sgn(xi1 + alpha*{self.b:g}*xi2) dalpha"
                                  f" * int_0^1 sgn(xi2 + beta*{self.a:g}*xi1) dbeta"),
            SymbolKind.DOUBLE_COMMUTATOR: "(int_0^1 sgn(xi + alpha xi1) dalpha)^2",
            SymbolKind.CONSTANT: f"{self.c:g}",
            SymbolKind.SEPARABLE_SGN: f"-i sgn(xi{self.axis})",
        }[self.kind]
        for which in self.adjoints:
            base = f"{which.value}[{base}]"
        return base

    @property
    def is_real(self) -> bool:
        return self.kind is not SymbolKind.SEPARABLE_SGN

    def base(self) -> 'SymbolDescriptor':
        return SymbolDescriptor(self.kind, self.a, self.b, self.c, self.axis)

    def _evaluate_base(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind is SymbolKind.C1_SGN:
            return _c1(first, second)
        if kind is SymbolKind.C1_INDICATOR:
            return 0.5 * (1.0 + _c1(first, second))
        if kind is SymbolKind.GEN22:
            return _c1(first, self.a * second) * _c1(first, self.b * second)
        if kind is SymbolKind.DOUBLE_COMMUTATOR:
            return _c1(first, second) ** 2
        if kind is SymbolKind.CIRCULAR:
            return _c1(first, self.b * second) * _c1(second, self.a * first)
        if kind is SymbolKind.CONSTANT:
            return np.full(np.broadcast(first, second).shape, float(self.c))
        selected = first if self.axis == 1 else second
        return -1j * np.sign(selected)

    def evaluate(self, first: ArrayLike, second: ArrayLike) -> ArrayLike:
        """Pointwise value; adjoint substitutions are applied without wrapping."""
        scalar, (first, second) = _broadcast(first, second)
        for which in reversed(self.adjoints):
            if which is Adjoint.STAR1:
                first = -first - second
            else:
                second = -first - second
        return _scalar_or_array(self._evaluate_base(first, second), scalar)

    def evaluate_lattice(self, rows: np.ndarray, cols: np.ndarray, N: int) -> np.ndarray:
        """Values at integer lattice indices, broadcast over rows x cols.

        Substituted indices are wrapped into [-N/2, N/2) so that the adjoint
        stays a permutation of the periodic lattice. Every family is
        homogeneous of degree zero, so the common frequency spacing drops out.
        """
        first = np.asarray(rows, dtype=np.int64)
        second = np.asarray(cols, dtype=np.int64)
        first, second = np.broadcast_arrays(first, second)
        half = N // 2
        for which in reversed(self.adjoints):
            if which is Adjoint.STAR1:
                first = np.mod(-first - second + half, N) - half
            else:
                second = np.mod(-first - second + half, N) - half
        return self._evaluate_base(first.astype(float), second.astype(float))


def make_symbol(kind: Union[str, SymbolKind], a: float = 1.0, b: float = 1.0,
                c: float = 1.0, axis: int = 1) -> SymbolDescriptor:
    """Build a descriptor from an enum value or a CLI name (c1, c1plus, gen22, circular)."""
    if isinstance(kind, str) and kind in CLI_KINDS:
        kind = CLI_KINDS[kind]
    try:
        kind = SymbolKind(kind)
    except ValueError:
        raise ValueError(f"Unsupported symbol kind: {kind}")
    return SymbolDescriptor(kind=kind, a=a, b=b, c=c, axis=axis)


def c1_sgn() -> SymbolDescriptor:
    return SymbolDescriptor(SymbolKind.C1_SGN)


def c1_indicator() -> SymbolDescriptor:
    return SymbolDescriptor(SymbolKind.C1_INDICATOR)


def gen22_product(a: float, b: float) -> SymbolDescriptor:
    return SymbolDescriptor(SymbolKind.GEN22, a=a, b=b)


def circular(a: float, b: float) -> SymbolDescriptor:
    return SymbolDescriptor(SymbolKind.CIRCULAR, a=a, b=b)


def double_commutator() -> SymbolDescriptor:
    """Definitionally gen22_product(1, 1)."""
    return gen22_product(1.0, 1.0)


def constant(c: float) -> SymbolDescriptor:
    return SymbolDescriptor(SymbolKind.CONSTANT, c=c)


def separable_sgn(axis: int) -> SymbolDescriptor:
    return SymbolDescriptor(SymbolKind.SEPARABLE_SGN, axis=axis)


def adjoint_symbol(m: SymbolDescriptor, which: Union[str, Adjoint]) -> SymbolDescriptor:
    """star1: m(-x1 - x2, x2); star2: m(x1, -x1 - x2)."""
    which = Adjoint(which)
    return SymbolDescriptor(m.kind, m.a, m.b, m.c, m.axis, m.adjoints + (which,))


# Midpoint-rule oracle

def _midpoint_counts(xi: np.ndarray, xi1: np.ndarray, nodes: int):
    """Count midpoint nodes alpha_i = (i + 1/2)/M with xi + alpha_i*xi1 positive, zero, negative.

    The integrand is a step function of alpha, so the midpoint sum reduces to
    counting the nodes on either side of the sign change.
    """
    moving = xi1 != 0
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        crossing = np.where(moving, -xi / np.where(moving, xi1, 1.0), 0.0) * nodes - 0.5
    above = nodes - np.clip(np.floor(crossing) + 1.0, 0, nodes)
    below = np.clip(np.ceil(crossing), 0, nodes)
    on = nodes - above - below
    positive = np.where(xi1 > 0, above, below)
    negative = np.where(xi1 > 0, below, above)
    still = np.sign(xi)
    positive = np.where(moving, positive, np.where(still > 0, nodes, 0))
    negative = np.where(moving, negative, np.where(still < 0, nodes, 0))
    on = np.where(moving, on, np.where(still == 0, nodes, 0))
    return positive, on, negative


def _sgn_mean(xi, xi1, nodes):
    positive, _, negative = _midpoint_counts(xi, xi1, nodes)
    return (positive - negative) / nodes


def _indicator_mean(xi, xi1, nodes):
    positive, on, _ = _midpoint_counts(xi, xi1, nodes)
    return (positive + 0.5 * on) / nodes


def quadrature_oracle(descriptor: SymbolDescriptor, point: FrequencyPoint,
                      nodes: int) -> float:
    """Midpoint-rule approximation of the defining alpha (and beta) integrals with M nodes."""
    if nodes < MIN_ORACLE_NODES:
        raise ValueError(f"Invalid node count M={nodes}: must be at least {MIN_ORACLE_NODES}")
    kind = descriptor.kind
    if kind in (SymbolKind.CONSTANT, SymbolKind.SEPARABLE_SGN):
        raise ValueError(f"Unsupported kind for quadrature: {kind.value} (closed form only)")
    if kind is SymbolKind.CIRCULAR:
        if point.xi2 is None:
            raise ValueError("Circular symbol requires xi2")
        first, second = float(point.xi1), float(point.xi2)
    else:
        first, second = float(point.xi), float(point.xi1)
    for which in reversed(descriptor.adjoints):
        if which is Adjoint.STAR1:
            first = -first - second
        else:
            second = -first - second
    x, y = np.float64(first), np.float64(second)
    if kind is SymbolKind.C1_SGN:
        value = _sgn_mean(x, y, nodes)
    elif kind is SymbolKind.C1_INDICATOR:
        value = _indicator_mean(x, y, nodes)
    elif kind is SymbolKind.DOUBLE_COMMUTATOR:
        value = _sgn_mean(x, y, nodes) ** 2
    elif kind is SymbolKind.GEN22:
        value = _sgn_mean(x, descriptor.a * y, nodes) * _sgn_mean(x, descriptor.b * y, nodes)
    else:
        value = _sgn_mean(x, descriptor.b * y, nodes) * _sgn_mean(y, descriptor.a * x, nodes)
    return float(value)


def quadrature_oracle_direct(xi: float, xi1: float, nodes: int) -> float:
    """Explicit midpoint sum of sgn(xi + alpha * xi1); reference for the counting oracle."""
    if nodes < MIN_ORACLE_NODES:
        raise ValueError(f"Invalid node count M={nodes}: must be at least {MIN_ORACLE_NODES}")
    alpha = (np.arange(nodes) + 0.5) / nodes
    return float(np.mean(np.sign(xi + alpha * xi1)))


def symbol_at(descriptor: SymbolDescriptor, point: FrequencyPoint) -> complex:
    """Closed-form value at a FrequencyPoint (xi, xi1), or (xi1, xi2) for circular symbols."""
    if descriptor.kind is SymbolKind.CIRCULAR:
        if point.xi2 is None:
            raise ValueError("Circular symbol requires xi2")
        return descriptor.evaluate(point.xi1, point.xi2)
    return descriptor.evaluate(point.xi, point.xi1)
