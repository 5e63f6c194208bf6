"""Stationary linear processes: coefficients, simulation, and second-order structure.

A process is given by its causal moving-average representation
``X_t = sum_{j>=0} c_j Z_{t-j}`` with unit-variance innovations ``Z_t``.
This module owns

* the coefficient models (explicit list, MA(q), AR(1), ARMA, FARIMA(d)),
* innovation laws with known fourth moments,
* the autocovariance ``gamma(h) = sum_j c_j c_{j+|h|}`` and the spectral
  density ``f(w) = |sum_j c_j e^{-ijw}|^2``,
* finite-horizon record simulation with a reproducible innovation stream.

Simulation truncates the coefficient sequence at a horizon ``J``; a record of
length ``L`` consumes exactly ``J + L`` innovation draws, covering the index
range ``1-J .. L`` of the doubly infinite innovation sequence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

__all__ = [
    "CoefficientModel",
    "InnovationSpec",
    "ProcessSpec",
    "SpectralDensity",
    "DecayAssumptionWarning",
    "autocovariance",
    "coefficients",
    "decay_envelope_constant",
    "default_horizon",
    "draw_innovations",
    "simulate_record",
    "spectral_density",
    "total_energy",
    "tail_energy",
]

_CAUSALITY_TOL = 1e-10
_MAX_INDEX = 2**31


class DecayAssumptionWarning(UserWarning):
    """Coefficient sequence violates the polynomial-decay envelope."""


@dataclass(frozen=True)
class CoefficientModel:
    """Causal coefficient sequence, identified by `kind` plus parameters.

    Kinds: ``white_noise``, ``explicit``, ``ma``, ``ar1``, ``arma``,
    ``farima``.  AR/ARMA models must be causal: every root of the
    autoregressive polynomial ``1 - phi_1 z - ... - phi_p z^p`` has to lie
    strictly outside the closed unit disk.
    """

    kind: str
    coeffs: tuple[float, ...] = ()
    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    d: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("white_noise", "explicit", "ma", "ar1", "arma", "farima"):
            raise ValueError(f"unknown coefficient model kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.coeffs:
                raise ValueError("explicit model needs a non-empty coefficient list")
            if not all(math.isfinite(c) for c in self.coeffs):
                raise ValueError("explicit coefficients must be finite")
            if self.coeffs[0] == 0.0:
                raise ValueError("leading coefficient c_0 must be non-zero")
        if self.kind in ("ar1", "arma") and self.phi:
            bad = _noncausal_roots(self.phi)
            if bad:
                raise ValueError(
                    "autoregressive polynomial is not causal; roots inside or on "
                    f"the unit disk: {bad}"
                )
        if self.kind == "farima":
            if not (-0.5 < self.d < 0.5):
                raise ValueError(f"fractional order d={self.d} outside (-0.5, 0.5)")
            if self.d > 0.0:
                warnings.warn(
                    "long-memory fractional model (d > 0): coefficients decay like "
                    "j**(d-1) and violate the |c_j| <= C (j+1)**(-1-delta) envelope",
                    DecayAssumptionWarning,
                    stacklevel=2,
                )

    # -- constructors ---------------------------------------------------
    @classmethod
    def white_noise(cls) -> "CoefficientModel":
        return cls("white_noise")

    @classmethod
    def explicit(cls, coeffs) -> "CoefficientModel":
        return cls("explicit", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def ma(cls, theta) -> "CoefficientModel":
        return cls("ma", theta=tuple(float(t) for t in theta))

    @classmethod
    def ar1(cls, phi: float) -> "CoefficientModel":
        return cls("ar1", phi=(float(phi),))

    @classmethod
    def arma(cls, phi, theta) -> "CoefficientModel":
        return cls("arma", phi=tuple(float(p) for p in phi), theta=tuple(float(t) for t in theta))

    @classmethod
    def farima(cls, d: float) -> "CoefficientModel":
        return cls("farima", d=float(d))

    # -- structure ------------------------------------------------------
    @property
    def finite_order(self) -> int | None:
        """Largest non-zero coefficient index, or None for infinite order."""
        if self.kind == "white_noise":
            return 0
        if self.kind == "explicit":
            c = np.asarray(self.coeffs)
            nz = np.nonzero(c)[0]
            return int(nz[-1]) if nz.size else 0
        if self.kind == "ma":
            return len(self.theta)
        if self.kind in ("ar1", "arma"):
            if not any(self.phi):
                return len(self.theta)
            return None
        # farima
        return 0 if self.d == 0.0 else None

    def label(self) -> str:
        if self.kind == "white_noise":
            return "white_noise"
        if self.kind == "explicit":
            return f"explicit[{len(self.coeffs)}]"
        if self.kind == "ma":
            return f"ma({','.join(repr(t) for t in self.theta)})"
        if self.kind == "ar1":
            return f"ar1({self.phi[0]!r})"
        if self.kind == "arma":
            return f"arma(phi={list(self.phi)!r},theta={list(self.theta)!r})"
        return f"farima({self.d!r})"

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "explicit":
            out["coefficients"] = list(self.coeffs)
        elif self.kind == "ma":
            out["theta"] = list(self.theta)
        elif self.kind == "ar1":
            out["phi"] = self.phi[0]
        elif self.kind == "arma":
            out["phi"] = list(self.phi)
            out["theta"] = list(self.theta)
        elif self.kind == "farima":
            out["d"] = self.d
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "CoefficientModel":
        if not isinstance(doc, dict):
            raise ValueError("model must be a JSON object")
        kind = doc.get("kind")
        if kind is None:
            raise ValueError("model: missing key 'kind'")
        allowed = {
            "white_noise": set(),
            "explicit": {"coefficients"},
            "ma": {"theta"},
            "ar1": {"phi"},
            "arma": {"phi", "theta"},
            "farima": {"d"},
        }
        if kind not in allowed:
            raise ValueError(f"model: unknown kind {kind!r}")
        unknown = set(doc) - allowed[kind] - {"kind"}
        if unknown:
            raise ValueError(f"model: unknown key {sorted(unknown)[0]!r}")
        if kind == "white_noise":
            return cls.white_noise()
        if kind == "explicit":
            return cls.explicit(doc["coefficients"])
        if kind == "ma":
            return cls.ma(doc["theta"])
        if kind == "ar1":
            return cls.ar1(doc["phi"])
        if kind == "arma":
            return cls.arma(doc.get("phi", ()), doc.get("theta", ()))
        return cls.farima(doc["d"])


def _noncausal_roots(phi) -> list[complex]:
    """Roots of 1 - phi_1 z - ... - phi_p z^p with |root| <= 1 + tol."""
    poly = np.concatenate([[-p for p in reversed(phi)], [1.0]])  # descending powers
    roots = np.roots(poly)
    return [complex(r) for r in roots if abs(r) <= 1.0 + _CAUSALITY_TOL]


def coefficients(model: CoefficientModel, count: int) -> np.ndarray:
    """First `count` coefficients of the causal moving-average representation."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if model.kind == "white_noise":
        c = np.zeros(count)
        c[0] = 1.0
        return c
    if model.kind == "explicit":
        c = np.zeros(count)
        src = np.asarray(model.coeffs)[:count]
        c[: src.size] = src
        return c
    if model.kind == "ma":
        c = np.zeros(count)
        c[0] = 1.0
        th = np.asarray(model.theta)[: max(count - 1, 0)]
        c[1 : 1 + th.size] = th
        return c
    if model.kind in ("ar1", "arma"):
        num = np.concatenate([[1.0], model.theta])
        den = np.concatenate([[1.0], [-p for p in model.phi]])
        impulse = np.zeros(count)
        impulse[0] = 1.0
        return signal.lfilter(num, den, impulse)
    # farima: c_j = c_{j-1} (j - 1 + d) / j
    j = np.arange(1, count)
    ratios = (j - 1.0 + model.d) / j
    return np.concatenate([[1.0], np.cumprod(ratios)]) if count > 1 else np.ones(1)


def total_energy(model: CoefficientModel) -> float:
    """Sum of squared coefficients over the full (possibly infinite) sequence."""
    if model.kind == "white_noise":
        return 1.0
    if model.kind == "explicit":
        return float(np.sum(np.square(model.coeffs)))
    if model.kind == "ma":
        return 1.0 + float(np.sum(np.square(model.theta)))
    if model.kind == "ar1":
        phi = model.phi[0]
        return 1.0 / (1.0 - phi * phi)
    if model.kind == "arma":
        if not any(model.phi):
            return 1.0 + float(np.sum(np.square(model.theta)))
        # extend until the block contribution is negligible
        block, start, total = 4096, 0, 0.0
        while start < 2**22:
            c = coefficients(model, start + block)[start:]
            total += float(c @ c)
            if start > 0 and float(c @ c) <= 1e-17 * total:
                return total
            start += block
        return total
    # farima: known closed form for the variance of the fractional filter
    if model.d == 0.0:
        return 1.0
    return float(special.gamma(1.0 - 2.0 * model.d) / special.gamma(1.0 - model.d) ** 2)


def tail_energy(model: CoefficientModel, horizon: int) -> float:
    """Sum of squared coefficients beyond index `horizon`."""
    order = model.finite_order
    if order is not None:
        return 0.0 if horizon >= order else float(
            np.sum(np.square(coefficients(model, order + 1)[horizon + 1 :]))
        )
    c = coefficients(model, horizon + 1)
    return max(0.0, total_energy(model) - float(c @ c))


def default_horizon(
    model: CoefficientModel,
    n: int,
    tail_tol: float = 1e-12,
    max_horizon: int = 2**22,
) -> int:
    """Simulation horizon: max(n, smallest J with tail energy <= tail_tol * total).

    Finite-order models are exact for any J >= model order.  Raises if no
    horizon below `max_horizon` meets the tolerance (slowly decaying
    coefficients); pass a larger `tail_tol` in that case.
    """
    order = model.finite_order
    if order is not None:
        return max(n, order)
    total = total_energy(model)
    j = 1
    while j <= max_horizon:
        if tail_energy(model, j) <= tail_tol * total:
            lo, hi = j // 2, j
            while lo + 1 < hi:
                mid = (lo + hi) // 2
                if tail_energy(model, mid) <= tail_tol * total:
                    hi = mid
                else:
                    lo = mid
            return max(n, hi)
        j *= 2
    raise ValueError(
        f"no horizon <= {max_horizon} reaches tail tolerance {tail_tol:g} for "
        f"{model.label()}; relax tail_tol"
    )


def autocovariance(coeffs, h: int) -> float:
    """gamma(h) = sum_j c_j c_{j+|h|} over the available (truncated) list."""
    c = np.asarray(coeffs, dtype=float)
    h = abs(int(h))
    if h >= c.size:
        return 0.0
    return float(c[: c.size - h] @ c[h:])


def decay_envelope_constant(coeffs, delta: float) -> float:
    """Smallest C with |c_j| <= C (j+1)**(-1-delta) over the given list."""
    c = np.abs(np.asarray(coeffs, dtype=float))
    j = np.arange(c.size)
    return float(np.max(c * (j + 1.0) ** (1.0 + delta)))


_SQRT3 = math.sqrt(3.0)
_DISTRIBUTIONS = ("gaussian", "rademacher", "uniform")
_SIGMA4 = {"gaussian": 3.0, "rademacher": 1.0, "uniform": 1.8}


@dataclass(frozen=True)
class InnovationSpec:
    """Unit-variance innovation law plus the seed of its stream."""

    distribution: str = "gaussian"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.distribution not in _DISTRIBUTIONS:
            raise ValueError(
                f"unknown innovation distribution {self.distribution!r}; "
                f"choose from {_DISTRIBUTIONS}"
            )
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def sigma4(self) -> float:
        """Fourth moment E Z^4 of the innovation law."""
        return _SIGMA4[self.distribution]

    def to_json(self) -> dict:
        return {"dist": self.distribution, "seed": int(self.seed)}

    @classmethod
    def from_json(cls, doc: dict) -> "InnovationSpec":
        if not isinstance(doc, dict):
            raise ValueError("innovations must be a JSON object")
        unknown = set(doc) - {"dist", "seed"}
        if unknown:
            raise ValueError(f"innovations: unknown key {sorted(unknown)[0]!r}")
        return cls(doc.get("dist", "gaussian"), int(doc.get("seed", 0)))


def draw_innovations(spec: InnovationSpec, count: int) -> np.ndarray:
    """Deterministic innovation stream of the given length."""
    rng = np.random.default_rng(int(spec.seed))
    if spec.distribution == "gaussian":
        return rng.standard_normal(count)
    if spec.distribution == "rademacher":
        return rng.integers(0, 2, size=count).astype(float) * 2.0 - 1.0
    return rng.uniform(-_SQRT3, _SQRT3, size=count)


@dataclass(frozen=True)
class ProcessSpec:
    """Simulatable process: coefficient model, innovations, truncation horizon.

    For infinite-order models the constructor enforces the tail-energy bound
    ``sum_{j>J} c_j^2 <= tail_tol * sum_j c_j^2``; slowly decaying models
    (fractional ones in particular) need an explicitly relaxed `tail_tol`.
    """

    model: CoefficientModel
    innovations: InnovationSpec
    horizon: int
    tail_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if not (0.0 < self.tail_tol < 1.0):
            raise ValueError("tail_tol must lie in (0, 1)")
        if self.model.finite_order is None:
            ratio = tail_energy(self.model, self.horizon) / total_energy(self.model)
            if ratio > self.tail_tol:
                raise ValueError(
                    f"tail energy ratio {ratio:.3e} at horizon {self.horizon} exceeds "
                    f"tail_tol {self.tail_tol:g} for {self.model.label()}"
                )

    def coefficient_array(self) -> np.ndarray:
        return coefficients(self.model, self.horizon + 1)

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "innovations": self.innovations.to_json(),
            "horizon": int(self.horizon),
            "tail_tol": self.tail_tol,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ProcessSpec":
        if not isinstance(doc, dict):
            raise ValueError("process spec must be a JSON object")
        unknown = set(doc) - {"model", "innovations", "horizon", "tail_tol"}
        if unknown:
            raise ValueError(f"process: unknown key {sorted(unknown)[0]!r}")
        if "model" not in doc or "horizon" not in doc:
            missing = "model" if "model" not in doc else "horizon"
            raise ValueError(f"process: missing key {missing!r}")
        return cls(
            CoefficientModel.from_json(doc["model"]),
            InnovationSpec.from_json(doc.get("innovations", {})),
            int(doc["horizon"]),
            float(doc.get("tail_tol", 1e-12)),
        )


def simulate_record(spec: ProcessSpec, length: int) -> np.ndarray:
    """Simulate X_1..X_length with X_t = sum_{j=0}^{J} c_j Z_{t-j}.

    Uses J + length innovation draws (indices 1-J .. length); the result is
    bit-reproducible given (seed, horizon, distribution).
    """
    if length < 1:
        raise ValueError("record length must be >= 1")
    if spec.horizon + length > _MAX_INDEX:
        raise ValueError(
            f"record of length {length} at horizon {spec.horizon} exceeds the "
            "supported index range"
        )
    draws = draw_innovations(spec.innovations, spec.horizon + length)
    kernel = spec.coefficient_array()
    nz = np.nonzero(kernel)[0]
    kernel = kernel[: nz[-1] + 1] if nz.size else kernel[:1]
    if kernel.size == 1 and kernel[0] == 1.0:
        return draws[spec.horizon :].copy()
    conv = signal.convolve(draws, kernel, mode="full", method="auto")
    return conv[spec.horizon : spec.horizon + length]


class SpectralDensity:
    """Evaluable spectral density f on [0, 2*pi].

    Rational form ``f(w) = |ma(e^{-iw})|^2 / |ar(e^{-iw})|^2`` with the
    polynomials given in ascending powers.  A truncated coefficient list
    (ar = [1]) and a closed-form ARMA density are both instances; the
    `provenance` field records which one this is.
    """

    def __init__(self, ma_coeffs, ar_coeffs=(1.0,), provenance: str = "truncated-sum"):
        self.ma_coeffs = np.asarray(ma_coeffs, dtype=float)
        self.ar_coeffs = np.asarray(ar_coeffs, dtype=float)
        if self.ma_coeffs.size == 0 or self.ar_coeffs.size == 0:
            raise ValueError("polynomials must be non-empty")
        self.provenance = provenance

    @classmethod
    def from_coefficients(cls, coeffs) -> "SpectralDensity":
        return cls(coeffs, provenance="truncated-sum")

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        e = np.exp(-1j * w)
        num = np.polynomial.polynomial.polyval(e, self.ma_coeffs)
        val = np.abs(num) ** 2
        if self.ar_coeffs.size > 1 or self.ar_coeffs[0] != 1.0:
            den = np.polynomial.polynomial.polyval(e, self.ar_coeffs)
            val = val / np.abs(den) ** 2
        return val if val.shape else float(val)

    def max_value(self, probe_points: int = 4096) -> float:
        grid = np.linspace(0.0, 2.0 * np.pi, probe_points, endpoint=False)
        return float(np.max(self(grid)))


def spectral_density(spec: ProcessSpec) -> SpectralDensity:
    """Spectral density of the process; closed form where the model has one."""
    model = spec.model
    if model.kind == "white_noise":
        return SpectralDensity([1.0], provenance="closed-form")
    if model.kind == "ma":
        return SpectralDensity(np.concatenate([[1.0], model.theta]), provenance="closed-form")
    if model.kind in ("ar1", "arma"):
        ma = np.concatenate([[1.0], model.theta])
        ar = np.concatenate([[1.0], [-p for p in model.phi]])
        return SpectralDensity(ma, ar, provenance="closed-form")
    return SpectralDensity.from_coefficients(spec.coefficient_array())
