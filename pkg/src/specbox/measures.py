"""Finite positive measures on the line and their Cauchy/Poisson transforms.

A measure here is a finite sum of point masses plus an absolutely continuous
part whose density is piecewise polynomial on a union of closed intervals.
For this class the Cauchy transform

    F(z) = integral of dmu(x) / (x - z)

has an exact closed form: atoms contribute w/(x0 - z) and a polynomial piece
contributes through the recurrence

    I_n(z) = int_a^b x^n/(x-z) dx = (b^n - a^n)/n + z * I_{n-1}(z),
    I_0(z) = Log((b - z)/(a - z))   (principal branch),

so no quadrature is needed on the evaluation path.  The Moebius map
z -> (b-z)/(a-z) sends C minus [a,b] into C minus the closed negative axis,
hence the principal logarithm is analytic wherever we evaluate.  Far from a
piece the recurrence is replaced by the moment series
-sum_m mu_m / z^{m+1}, which avoids the cancellation the recurrence suffers
when |z| is much larger than the support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError, InvalidModelError

__all__ = [
    "SpectralMeasure",
    "HerglotzEvaluator",
    "borel",
    "poisson_density",
]

# Tolerance for "the density dips negative" at construction; absorbs roundoff
# in user-supplied coefficients.
_NEG_TOL = 1e-12
# Number of Chebyshev sample points per piece in the positivity check.
_POS_SAMPLES = 64
# Far-field switch: use the moment series when |z| exceeds this multiple of
# the piece's outer radius (series ratio then <= 1/3).
_FAR_FACTOR = 3.0
_FAR_TERMS = 48


def _chebyshev_points(a: float, b: float, n: int) -> np.ndarray:
    t = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * t


@dataclass(frozen=True)
class _Piece:
    a: float
    b: float
    coef: tuple[float, ...]          # density p(x) = sum coef[k] x^k
    moments: tuple[float, ...] = field(repr=False, default=())

    @property
    def mass(self) -> float:
        return self.moments[0]

    @property
    def radius(self) -> float:
        return max(abs(self.a), abs(self.b))


def _piece_moments(a: float, b: float, coef: Sequence[float], count: int) -> np.ndarray:
    """Exact moments mu_m = int_a^b x^m p(x) dx for m = 0..count-1."""
    mom = np.zeros(count)
    for m in range(count):
        powers = m + 1 + np.arange(len(coef))
        mom[m] = np.sum(np.asarray(coef) * (b ** powers - a ** powers) / powers)
    return mom


def _validate_piece(a: float, b: float, coef: Sequence[float]) -> _Piece:
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise InvalidModelError(f"piece interval [{a}, {b}] must be finite with a < b")
    coef = [float(c) for c in coef]
    if len(coef) == 0:
        raise InvalidModelError("piece needs at least one polynomial coefficient")
    if not all(np.isfinite(coef)):
        raise InvalidModelError("piece coefficients must be finite")
    # Positivity: sample at Chebyshev points and endpoints, and refine with the
    # critical points of p (real roots of p') inside the interval.
    xs = [np.array([a, b]), _chebyshev_points(a, b, _POS_SAMPLES)]
    if len(coef) > 2:
        crit = npoly.polyroots(npoly.polyder(coef))
        crit = crit[np.abs(crit.imag) < 1e-9].real
        crit = crit[(crit > a) & (crit < b)]
        if crit.size:
            xs.append(crit)
    samples = np.concatenate(xs)
    vals = npoly.polyval(samples, coef)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if float(np.min(vals)) < -_NEG_TOL * scale:
        worst = samples[int(np.argmin(vals))]
        raise InvalidModelError(
            f"density negative on [{a}, {b}]: p({worst:.6g}) = {np.min(vals):.3e}"
        )
    moments = _piece_moments(a, b, coef, _FAR_TERMS)
    return _Piece(float(a), float(b), tuple(coef), tuple(moments))


class SpectralMeasure:
    """Finite positive Borel measure: atoms plus piecewise-polynomial density.

    Parameters
    ----------
    atoms:
        Sequence of (position, weight) pairs, weights > 0, positions distinct.
    pieces:
        Sequence of ([a, b], coefficients) pairs; the coefficient list
        c0, c1, ... defines the density p(x) = c0 + c1 x + ... on [a, b].
        Pieces must have pairwise disjoint interiors and p >= 0 on each piece.

    Instances are immutable after construction and safe to share across
    threads; evaluation is pure.
    """

    def __init__(self, atoms: Sequence = (), pieces: Sequence = ()):
        parsed_atoms = []
        for entry in atoms:
            x0, w = entry
            x0, w = float(x0), float(w)
            if not np.isfinite(x0) or not np.isfinite(w):
                raise InvalidModelError("atom position and weight must be finite")
            if w <= 0:
                raise InvalidModelError(f"atom weight at {x0} must be > 0, got {w}")
            parsed_atoms.append((x0, w))
        positions = [x for x, _ in parsed_atoms]
        if len(set(positions)) != len(positions):
            raise InvalidModelError("atom positions must be pairwise distinct")

        parsed_pieces = [_validate_piece(a, b, coef) for (a, b), coef in pieces]
        parsed_pieces.sort(key=lambda p: p.a)
        for prev, nxt in zip(parsed_pieces, parsed_pieces[1:]):
            if nxt.a < prev.b - 1e-15:
                raise InvalidModelError(
                    f"pieces [{prev.a}, {prev.b}] and [{nxt.a}, {nxt.b}] overlap"
                )

        mass = sum(w for _, w in parsed_atoms) + sum(p.mass for p in parsed_pieces)
        if not np.isfinite(mass) or mass <= 0:
            raise InvalidModelError(f"total mass must be positive and finite, got {mass}")

        self.atoms: tuple[tuple[float, float], ...] = tuple(sorted(parsed_atoms))
        self.pieces: tuple[_Piece, ...] = tuple(parsed_pieces)
        self.total_mass: float = float(mass)
        self._atom_x = np.array([x for x, _ in self.atoms])
        self._atom_w = np.array([w for _, w in self.atoms])

    # -- basic queries ------------------------------------------------------

    @property
    def support_min(self) -> float:
        lows = [p.a for p in self.pieces] + [x for x, _ in self.atoms]
        return min(lows)

    @property
    def support_max(self) -> float:
        highs = [p.b for p in self.pieces] + [x for x, _ in self.atoms]
        return max(highs)

    def __repr__(self) -> str:
        return (
            f"SpectralMeasure(atoms={len(self.atoms)}, pieces={len(self.pieces)}, "
            f"mass={self.total_mass:.6g})"
        )

    # -- serialization (config schema: atoms [[x, w], ...], pieces
    #    [{"interval": [a, b], "poly": [c0, ...]}, ...]) ---------------------

    def to_dict(self) -> dict:
        return {
            "atoms": [[x, w] for x, w in self.atoms],
            "pieces": [
                {"interval": [p.a, p.b], "poly": list(p.coef)} for p in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralMeasure":
        atoms = data.get("atoms", [])
        pieces = [(p["interval"], p["poly"]) for p in data.get("pieces", [])]
        return cls(atoms=atoms, pieces=pieces)

    # -- transforms ---------------------------------------------------------

    def borel(self, z):
        """Cauchy transform int dmu(x)/(x - z), closed form, array-capable.

        Real z is accepted only outside the closed support (no principal
        values arise there); otherwise raises DomainError.
        """
        z_arr = np.asarray(z, dtype=complex)
        scalar = z_arr.ndim == 0
        z_flat = np.atleast_1d(z_arr)

        on_axis = z_flat.imag == 0.0
        if np.any(on_axis):
            x_real = z_flat.real[on_axis]
            for x0, _ in self.atoms:
                if np.any(x_real == x0):
                    raise DomainError(f"z = {x0} sits exactly on an atom")
            for p in self.pieces:
                if np.any((x_real >= p.a) & (x_real <= p.b)):
                    raise DomainError(
                        f"real z inside density piece [{p.a}, {p.b}]"
                    )

        out = np.zeros_like(z_flat)
        if self._atom_x.size:
            out += np.sum(
                self._atom_w / (self._atom_x - z_flat[..., None]), axis=-1
            )
        for p in self.pieces:
            out += _piece_borel(p, z_flat)
        out = out.reshape(z_arr.shape)
        return complex(out) if scalar else out

    def poisson(self, E: float, eps: float) -> float:
        """Im of the Cauchy transform at E + i*eps (eps > 0); >= 0 always."""
        if eps <= 0:
            raise DomainError(f"eps must be > 0, got {eps}")
        val = float(self.borel(complex(E, eps)).imag)
        # Herglotz property guarantees >= 0; clip pure roundoff.
        if val < -1e-12 * max(1.0, self.total_mass / eps):
            raise ArithmeticError(f"Poisson kernel went negative: {val}")
        return max(val, 0.0)

    def evaluator(self) -> "HerglotzEvaluator":
        return HerglotzEvaluator(self.borel, tag="log-rational")


def _piece_borel(p: _Piece, z: np.ndarray) -> np.ndarray:
    """Closed-form int_a^b p(x)/(x-z) dx for an array of z off [a, b]."""
    out = np.empty_like(z)
    far = np.abs(z) > _FAR_FACTOR * max(p.radius, 1.0)
    near = ~far
    if np.any(near):
        zn = z[near]
        term = np.log((p.b - zn) / (p.a - zn))  # I_0
        acc = p.coef[0] * term
        for n in range(1, len(p.coef)):
            term = (p.b ** n - p.a ** n) / n + zn * term  # I_n from I_{n-1}
            acc += p.coef[n] * term
        out[near] = acc
    if np.any(far):
        zf = z[far]
        inv = 1.0 / zf
        acc = np.zeros_like(zf)
        power = inv.copy()
        for m in range(_FAR_TERMS):
            acc -= p.moments[m] * power
            power *= inv
        out[far] = acc
    return out


def borel(measure: SpectralMeasure, z):
    """Module-level alias for :meth:`SpectralMeasure.borel`."""
    return measure.borel(z)


def poisson_density(measure: SpectralMeasure, E: float, eps: float) -> float:
    """Module-level alias for :meth:`SpectralMeasure.poisson`."""
    return measure.poisson(E, eps)


@dataclass(frozen=True)
class HerglotzEvaluator:
    """A map z -> complex defined for Im z > 0 with Im(value) >= 0.

    ``tag`` records the closed-form family when known (``rational``,
    ``log-rational``, ``composite``).  ``reflected`` extends the map to the
    lower half-plane through conjugate symmetry, value(conj(z)) =
    conj(value(z)).
    """

    fn: Callable
    tag: str | None = None

    def __call__(self, z):
        return self.fn(z)

    def reflected(self, z):
        z = complex(z)
        if z.imag >= 0:
            return complex(self.fn(z))
        return complex(np.conj(self.fn(np.conj(z))))
