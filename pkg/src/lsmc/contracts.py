"""Payoff definitions with discounting and the ordered regression basis families.

Three contract kinds are supported: a put on a single stock, a best-of call on
two assets, and an equally weighted basket call on four assets.  Basis families
are nested: the M-term family is always a prefix of the larger families for
the same contract, with the constant first and the discounted payout second.
Monomial terms are evaluated on raw prices; conditioning is the regression
solver's problem, not the basis's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PUT_SINGLE = "put_single"
BESTOF_CALL = "bestof_call"
BASKET_CALL = "basket_call"
PAYOFF_KINDS = (PUT_SINGLE, BESTOF_CALL, BASKET_CALL)

_N_ASSETS = {PUT_SINGLE: 1, BESTOF_CALL: 2, BASKET_CALL: 4}


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """Contract payoff: kind, strike, and (for the basket) averaging weights.

    All three kinds pay max(., 0), so nonnegative defaults to True; the flag
    drives the engine rule that a zero payout always continues.
    """

    kind: str
    strike: float
    weights: tuple[float, ...] | None = None
    nonnegative: bool = True

    def __post_init__(self) -> None:
        if self.kind not in PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}; expected one of {PAYOFF_KINDS}")
        if not self.strike > 0.0:
            raise ValueError("strike must be strictly positive")
        if self.kind == BASKET_CALL:
            w = self.weights if self.weights is not None else (0.25, 0.25, 0.25, 0.25)
            w = tuple(float(x) for x in w)
            if not math.isclose(sum(w), 1.0, rel_tol=0.0, abs_tol=1e-12):
                raise ValueError("basket weights must sum to 1")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise ValueError(f"weights are only meaningful for {BASKET_CALL}")

    @property
    def n_assets(self) -> int:
        if self.kind == BASKET_CALL:
            return len(self.weights)
        return _N_ASSETS[self.kind]


def discounted_payout(
    spec: PayoffSpec, state: np.ndarray, t: float, rate: float
) -> float | np.ndarray:
    """exp(-rate * t) times the exercise value at `state`.

    state is either a single J-vector or an (N, J) batch of states; the return
    type matches.  Non-negative for every supported kind.
    """
    s = np.asarray(state, dtype=float)
    batched = s.ndim == 2
    s2 = s if batched else s[None, :]
    if s2.shape[1] != spec.n_assets:
        raise ValueError(f"{spec.kind} expects {spec.n_assets} asset(s), got {s2.shape[1]}")
    if spec.kind == PUT_SINGLE:
        raw = np.maximum(spec.strike - s2[:, 0], 0.0)
    elif spec.kind == BESTOF_CALL:
        raw = np.maximum(s2.max(axis=1) - spec.strike, 0.0)
    else:
        raw = np.maximum(s2 @ np.asarray(spec.weights) - spec.strike, 0.0)
    out = math.exp(-rate * t) * raw
    return out if batched else float(out[0])


@dataclass(frozen=True)
class BasisTerm:
    """One regressor: the constant, the payoff, or a price monomial."""

    kind: str  # "const" | "payoff" | "mono"
    exponents: tuple[int, ...] = ()

    @property
    def label(self) -> str:
        if self.kind == "const":
            return "1"
        if self.kind == "payoff":
            return "Z"
        parts = []
        for j, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"S{j + 1}")
            elif e > 1:
                parts.append(f"S{j + 1}^{e}")
        return "*".join(parts) if parts else "1"


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Ordered list of M regressors for one contract kind."""

    case: str
    m: int
    terms: tuple[BasisTerm, ...]

    def __post_init__(self) -> None:
        if self.m != len(self.terms):
            raise ValueError(f"m={self.m} but {len(self.terms)} terms given")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)


def _mono(*exponents: int) -> BasisTerm:
    return BasisTerm("mono", tuple(exponents))


# Best-of family, degree-graded and lexicographic within degree; prefixes at
# M = 4 (linear), 7 (quadratic), 11 (cubic).
_BESTOF_TERMS = (
    BasisTerm("const"),
    BasisTerm("payoff"),
    _mono(1, 0),
    _mono(0, 1),
    _mono(2, 0),
    _mono(1, 1),
    _mono(0, 2),
    _mono(3, 0),
    _mono(2, 1),
    _mono(1, 2),
    _mono(0, 3),
)
_BESTOF_M = (4, 7, 11)

# Basket family: linear terms, then pure squares, then cross products, so the
# M = 6 and M = 10 subsets are prefixes of the 16-term degree-2 family.
_BASKET_TERMS = (
    (BasisTerm("const"), BasisTerm("payoff"))
    + tuple(_mono(*(1 if j == k else 0 for j in range(4))) for k in range(4))
    + tuple(_mono(*(2 if j == k else 0 for j in range(4))) for k in range(4))
    + tuple(
        _mono(*(1 if j in (a, b) else 0 for j in range(4)))
        for a in range(4)
        for b in range(a + 1, 4)
    )
)
_BASKET_M = (6, 10, 16)


def basis_family(case: str, m: int) -> BasisSpec:
    """First m terms of the fixed regressor ordering for the contract kind.

    Supported sizes: put_single takes any m >= 2 (constant, payoff, then
    rising powers of the price); bestof_call takes m in {4, 7, 11};
    basket_call takes m in {6, 10, 16}.
    """
    if case == PUT_SINGLE:
        if m < 2:
            raise ValueError(f"put_single basis needs m >= 2, got {m}")
        terms = (BasisTerm("const"), BasisTerm("payoff")) + tuple(
            _mono(k) for k in range(1, m - 1)
        )
        return BasisSpec(case, m, terms)
    if case == BESTOF_CALL:
        if m not in _BESTOF_M:
            raise ValueError(f"bestof_call basis supports m in {_BESTOF_M}, got {m}")
        return BasisSpec(case, m, _BESTOF_TERMS[:m])
    if case == BASKET_CALL:
        if m not in _BASKET_M:
            raise ValueError(f"basket_call basis supports m in {_BASKET_M}, got {m}")
        return BasisSpec(case, m, _BASKET_TERMS[:m])
    raise ValueError(f"unknown payoff kind {case!r}; expected one of {PAYOFF_KINDS}")


def basis_row(spec: BasisSpec, state: np.ndarray, z: float) -> np.ndarray:
    """Evaluate the basis terms at one state; z is the discounted payout there."""
    return design_matrix(spec, np.asarray(state, dtype=float)[None, :], np.array([z]))[0]


def design_matrix(spec: BasisSpec, states: np.ndarray, z: np.ndarray) -> np.ndarray:
    """(N, M) matrix of basis term values over a batch of states.

    Column 0 is the constant 1 and the payoff column equals z, which must hold
    the discounted payout of each row's state at the date in question.
    """
    states = np.asarray(states, dtype=float)
    z = np.asarray(z, dtype=float)
    n = states.shape[0]
    cols = np.empty((n, spec.m))
    for k, term in enumerate(spec.terms):
        if term.kind == "const":
            cols[:, k] = 1.0
        elif term.kind == "payoff":
            cols[:, k] = z
        else:
            col = np.ones(n)
            for j, e in enumerate(term.exponents):
                if e:
                    col = col * states[:, j] ** e
            cols[:, k] = col
    return cols
