"""Power-type divergence generators and finite-support divergence values.

The central object is a convex ``generator`` function ``phi`` on an interval,
normalized so that ``phi(1) = phi'(1) = 0`` and ``phi''(1) > 0``.  A generator
induces a (pseudo)distance between a measure ``Q`` and a reference measure
``P`` with ``Q`` absolutely continuous w.r.t. ``P``:

    D_phi(Q, P) = sum_x phi(dQ/dP(x)) P(x)        (finite supports)

The one-parameter power family implemented here is, for index ``g`` outside
``{0, 1}``,

    phi_g(x) = (x**g - g*x + g - 1) / (g * (g - 1))

with the continuous limits ``phi_0(x) = -log(x) + x - 1`` (likelihood
divergence) and ``phi_1(x) = x*log(x) - x + 1`` (Kullback-Leibler).  The
index ``g = 2`` gives the half chi-square ``(x - 1)**2 / 2``, the only member
extended to arguments of arbitrary sign; ``g = 1/2`` is self-conjugate
(Hellinger-type).  The L1 distance is excluded: it does not arise from a
smooth generator of this family.

Conjugation maps a generator to ``x * phi(1/x)`` and swaps the two arguments
of the induced divergence.  On the power family it acts as ``g -> 1 - g``.

The ``sharp`` transform ``phi#(x) = x * phi'(x) - phi(x)`` is the building
block of the dual (variational) representation used by the estimation module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError, RootFindError, ValidationError

INF = math.inf

# Indices closer than this to 0 or 1 are evaluated with the exact limit
# branch; the power form is numerically dead there.
GAMMA_LIMIT_TOL = 1e-9

_ORDERS = (0, 1, 2)


class DivergenceSpec:
    """Abstract convex generator with evaluation up to second order.

    Out-of-domain evaluations return ``+inf`` rather than raising; the
    optimizers in this package treat infinite objective values as rejected
    points.
    """

    def value(self, x: float, order: int = 0) -> float:
        raise NotImplementedError

    def conjugate(self) -> "DivergenceSpec":
        raise NotImplementedError

    def sharp(self, x: float) -> float:
        """Return ``x * phi'(x) - phi(x)``, ``+inf`` outside the domain."""
        raise NotImplementedError

    def prime_inverse(self, y: float) -> float:
        """Inverse of ``phi'``.

        Values of ``y`` at or beyond the range of ``phi'`` map to the
        corresponding domain endpoint (0 or ``+inf``); callers clip the
        result to their feasible box.
        """
        lo, hi = 1e-12, 1e12
        f = lambda x: self.value(x, order=1) - y
        flo, fhi = f(lo), f(hi)
        if flo >= 0.0:
            return 0.0
        if fhi <= 0.0:
            return INF
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if f(mid) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * max(1.0, lo):
                break
        return 0.5 * (lo + hi)

    # Vector helpers used by the estimation hot loops.  Subclasses with
    # closed forms override these with array arithmetic.
    def value_array(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        return np.array([self.value(float(v), order) for v in np.ravel(x)]).reshape(np.shape(x))

    def sharp_array(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.sharp(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))


def _check_order(order: int) -> None:
    if order not in _ORDERS:
        raise ValidationError(f"derivative order must be one of {_ORDERS}, got {order}")


@dataclass(frozen=True)
class CressieRead(DivergenceSpec):
    """Power-family generator with index ``gamma``.

    Domain: positive reals for every index, with 0 included when the
    generator stays finite there (indices above 0); all reals for the
    half chi-square index 2.
    """

    gamma: float

    @property
    def _branch(self) -> str:
        g = self.gamma
        if abs(g) < GAMMA_LIMIT_TOL:
            return "log"
        if abs(g - 1.0) < GAMMA_LIMIT_TOL:
            return "xlogx"
        if g == 2.0:
            return "chi2"
        return "power"

    def value(self, x: float, order: int = 0) -> float:
        _check_order(order)
        g = self.gamma
        branch = self._branch
        if branch == "chi2":
            # Defined on the whole real line (signed arguments allowed).
            if order == 0:
                return 0.5 * (x - 1.0) ** 2
            if order == 1:
                return x - 1.0
            return 1.0
        if branch == "log":
            if x <= 0.0:
                return INF
            if order == 0:
                return -math.log(x) + x - 1.0
            if order == 1:
                return 1.0 - 1.0 / x
            return 1.0 / (x * x)
        if branch == "xlogx":
            if x < 0.0:
                return INF
            if x == 0.0:
                # phi(0) = 1 by continuity; derivatives blow up.
                return 1.0 if order == 0 else (-INF if order == 1 else INF)
            if order == 0:
                return x * math.log(x) - x + 1.0
            if order == 1:
                return math.log(x)
            return 1.0 / x
        # Generic power branch.
        if x < 0.0:
            return INF
        if x == 0.0:
            if order == 0:
                return 1.0 / g if g > 0.0 else INF
            if order == 1:
                return -1.0 / (g - 1.0) if g > 1.0 else -INF
            return 0.0 if g > 2.0 else INF
        try:
            if order == 0:
                return (x ** g - g * x + g - 1.0) / (g * (g - 1.0))
            if order == 1:
                return (x ** (g - 1.0) - 1.0) / (g - 1.0)
            return x ** (g - 2.0)
        except OverflowError:
            return INF

    def conjugate(self) -> "CressieRead":
        return CressieRead(1.0 - self.gamma)

    def sharp(self, x: float) -> float:
        g = self.gamma
        branch = self._branch
        if branch == "chi2":
            return 0.5 * (x * x - 1.0)
        if branch == "log":
            return math.log(x) if x > 0.0 else INF
        if branch == "xlogx":
            return x - 1.0 if x >= 0.0 else INF
        if x < 0.0:
            return INF
        if x == 0.0:
            return -1.0 / g if g > 0.0 else INF
        try:
            return (x ** g - 1.0) / g
        except OverflowError:
            return INF

    def prime_inverse(self, y: float) -> float:
        g = self.gamma
        branch = self._branch
        if branch == "chi2":
            return y + 1.0
        if branch == "log":
            return 1.0 / (1.0 - y) if y < 1.0 else INF
        if branch == "xlogx":
            return math.exp(min(y, 700.0))
        base = 1.0 + (g - 1.0) * y
        if base <= 0.0:
            return 0.0 if g > 1.0 else INF
        try:
            return base ** (1.0 / (g - 1.0))
        except OverflowError:
            return INF

    # Array fast paths (hot loops in the dual criterion).
    def value_array(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        _check_order(order)
        x = np.asarray(x, dtype=float)
        branch = self._branch
        g = self.gamma
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if branch == "chi2":
                if order == 0:
                    return 0.5 * (x - 1.0) ** 2
                return x - 1.0 if order == 1 else np.ones_like(x)
            out = np.full_like(x, INF)
            pos = x > 0.0
            xp = x[pos]
            if branch == "log":
                vals = {0: -np.log(xp) + xp - 1.0, 1: 1.0 - 1.0 / xp, 2: 1.0 / xp ** 2}[order]
            elif branch == "xlogx":
                vals = {0: xp * np.log(xp) - xp + 1.0, 1: np.log(xp), 2: 1.0 / xp}[order]
            else:
                vals = {
                    0: (xp ** g - g * xp + g - 1.0) / (g * (g - 1.0)),
                    1: (xp ** (g - 1.0) - 1.0) / (g - 1.0),
                    2: xp ** (g - 2.0),
                }[order]
            out[pos] = vals
            zero = x == 0.0
            if np.any(zero):
                out[zero] = self.value(0.0, order)
        return out

    def sharp_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        branch = self._branch
        g = self.gamma
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if branch == "chi2":
                return 0.5 * (x * x - 1.0)
            out = np.full_like(x, INF)
            pos = x > 0.0
            xp = x[pos]
            if branch == "log":
                out[pos] = np.log(xp)
            elif branch == "xlogx":
                out[pos] = xp - 1.0
                out[x == 0.0] = -1.0
            else:
                out[pos] = (xp ** g - 1.0) / g
                if g > 0.0:
                    out[x == 0.0] = -1.0 / g
        return out


@dataclass(frozen=True)
class ConjugateSpec(DivergenceSpec):
    """Generic conjugate ``x * base(1/x)`` of a generator without closed form.

    Derivatives follow from the product rule:

        conj'(x)  = base(1/x) - (1/x) * base'(1/x)
        conj''(x) = base''(1/x) / x**3
        conj#(x)  = -base'(1/x)
    """

    base: DivergenceSpec

    def value(self, x: float, order: int = 0) -> float:
        _check_order(order)
        if x <= 0.0:
            return INF
        inv = 1.0 / x
        if order == 0:
            return x * self.base.value(inv)
        if order == 1:
            return self.base.value(inv) - inv * self.base.value(inv, 1)
        return self.base.value(inv, 2) / x ** 3

    def conjugate(self) -> DivergenceSpec:
        return self.base

    def sharp(self, x: float) -> float:
        if x <= 0.0:
            return INF
        return -self.base.value(1.0 / x, 1)

    def sharp_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, INF)
        pos = x > 0.0
        out[pos] = -self.base.value_array(1.0 / x[pos], 1)
        return out

    def value_array(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        _check_order(order)
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, INF)
        pos = x > 0.0
        inv = 1.0 / x[pos]
        if order == 0:
            out[pos] = x[pos] * self.base.value_array(inv, 0)
        elif order == 1:
            out[pos] = self.base.value_array(inv, 0) - inv * self.base.value_array(inv, 1)
        else:
            out[pos] = self.base.value_array(inv, 2) / x[pos] ** 3
        return out


def eval_phi(spec: DivergenceSpec, x: float, order: int = 0) -> float:
    """Evaluate the generator or one of its first two derivatives at ``x``."""
    _check_order(order)
    return spec.value(float(x), order)


def conjugate(spec: DivergenceSpec) -> DivergenceSpec:
    """Return the conjugate generator ``x * phi(1/x)``."""
    return spec.conjugate()


def phi_sharp(spec: DivergenceSpec, x: float) -> float:
    """Return ``x * phi'(x) - phi(x)`` at ``x`` (``+inf`` outside the domain)."""
    return spec.sharp(float(x))


@dataclass(frozen=True)
class FiniteMeasure:
    """Finitely supported measure with labelled atoms.

    Masses are kept exactly as given; no hidden normalization.  Signed
    masses are allowed (weighted empirical measures produce them), but
    several consumers require nonnegative reference masses and validate
    on entry.
    """

    support: tuple
    masses: tuple

    def __post_init__(self):
        support = tuple(self.support)
        masses = tuple(float(m) for m in self.masses)
        if len(support) != len(masses):
            raise ValidationError("support and masses must have equal length")
        if len(set(support)) != len(support):
            raise ValidationError("support labels must be distinct")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_probs(cls, probs: Iterable[float], support=None) -> "FiniteMeasure":
        probs = tuple(float(p) for p in probs)
        if support is None:
            support = tuple(range(len(probs)))
        return cls(tuple(support), probs)

    def total_mass(self) -> float:
        return math.fsum(self.masses)

    def mass(self, label) -> float:
        try:
            return self.masses[self.support.index(label)]
        except ValueError:
            return 0.0

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.masses))


def divergence_finite(spec: DivergenceSpec, q: FiniteMeasure, p: FiniteMeasure) -> float:
    """Divergence ``sum phi(q_i/p_i) p_i`` of ``q`` from reference ``p``.

    Supports are unioned.  Conventions: a shared null atom (``q = p = 0``)
    contributes nothing; mass of ``q`` on a null atom of ``p`` makes the
    divergence ``+inf``.  Negative reference masses are rejected.
    """
    pd = p.as_dict()
    qd = q.as_dict()
    if any(m < 0.0 for m in pd.values()):
        raise ValidationError("reference measure must have nonnegative masses")
    terms = []
    for label in set(pd) | set(qd):
        pm = pd.get(label, 0.0)
        qm = qd.get(label, 0.0)
        if pm == 0.0:
            if qm != 0.0:
                return INF
            continue
        term = spec.value(qm / pm) * pm
        if math.isinf(term):
            return INF
        terms.append(term)
    return math.fsum(terms)


def _prime_inverse_bracketed(spec: DivergenceSpec, y: float) -> float:
    """Monotone fallback solve of ``phi'(x) = y`` (used by tests)."""
    x = spec.prime_inverse(y)
    if math.isfinite(x):
        return x
    raise RootFindError(f"phi' never attains {y} on the domain interior")


def require_domain(spec: DivergenceSpec, x: float) -> None:
    """Raise :class:`DomainError` when ``phi(x)`` is infinite."""
    if math.isinf(spec.value(x)):
        raise DomainError(f"{x} lies outside the domain of {spec!r}")
