"""Branching mechanisms, their truncations and the derived offspring law.

A mechanism is ``psi(l) = b*l + c*l**2 + int (exp(-l z) - 1 + l z) mu(dz)``;
the truncated mechanism drops the drift and the jumps below ``delta``::

    psi_delta(l) = c*l**2 + int_{z >= delta} (exp(-l z) - 1 + l z) mu(dz)

Jump measures come in four families (none, finite atoms, power law with an
optional upper cutoff, exponentially tempered power law).  Integrals use
closed forms where they exist and adaptive Gauss-Kronrod quadrature
(QUADPACK via :func:`scipy.integrate.quad`) otherwise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import ConfigurationError, DomainError, NumericFailure

QUAD_EPSREL = 1e-13
QUAD_LIMIT = 400
OFFSPRING_RESIDUAL = 1e-12
OFFSPRING_MAX_K = 10**6

VARIANTS = ("none", "atoms", "power_law", "tempered")


# --------------------------------------------------------------------------
# scalar kernels, accurate near zero

_PHI2_SERIES = [(-1.0) ** k / math.factorial(k) for k in range(2, 14)]


def phi2(x):
    """``exp(-x) - 1 + x`` without cancellation for small ``x``."""
    if x < 0.05:
        acc = 0.0
        for coef in reversed(_PHI2_SERIES):
            acc = acc * x + coef
        return acc * x * x
    return math.expm1(-x) + x


def _phi2_over_sq(x):
    # (exp(-x) - 1 + x) / x**2, smooth at 0
    if x < 0.05:
        acc = 0.0
        for coef in reversed(_PHI2_SERIES):
            acc = acc * x + coef
        return acc
    return (math.expm1(-x) + x) / (x * x)


def _phi1_over_x(x):
    # (1 - exp(-x)) / x, smooth at 0
    if x < 1e-8:
        return 1.0 - 0.5 * x
    return -math.expm1(-x) / x


def _upper_gamma(s, x):
    # Gamma(s, x) for s > -2 via Gamma(s, x) = (Gamma(s + 1, x) - x**s e**-x) / s
    if s > 0:
        return special.gammaincc(s, x) * special.gamma(s)
    return (_upper_gamma(s + 1.0, x) - x**s * math.exp(-x)) / s


def _quad(fn, a, b, name, **kw):
    # full_output returns (val, err, info) or, on a QUADPACK warning, (val, err, info, message[, explain])
    val, err, *rest = integrate.quad(
        fn, a, b, epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1, **kw
    )
    warned = len(rest) >= 2
    if not math.isfinite(val) or (warned and err > 1e-10 * max(abs(val), 1e-300)):
        raise NumericFailure(f"quadrature for {name} on [{a}, {b}] did not converge (estimate {val}, error {err})")
    return val


# --------------------------------------------------------------------------
# jump measures


@dataclass(frozen=True)
class JumpMeasure:
    """Levy measure ``mu`` on ``(0, inf)`` with ``int (z ^ z**2) mu(dz) < inf``.

    Use the constructors :meth:`none`, :meth:`atomic`, :meth:`power_law` and
    :meth:`tempered` rather than the raw fields.  Densities are
    ``C z**(-1-alpha) exp(-rate z)`` (``rate = 0`` for the power law),
    restricted to ``z <= cutoff`` when a cutoff is given.
    """

    variant: str = "none"
    atoms: tuple = ()
    C: float = 0.0
    alpha: float = 0.0
    cutoff: float | None = None
    rate: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown jump-measure variant {self.variant!r}", ["mu.variant"])
        if self.variant == "atoms":
            atoms = tuple((float(z), float(w)) for z, w in self.atoms)
            if not atoms:
                raise ConfigurationError("atomic measure needs at least one atom", ["mu.atoms"])
            for z, w in atoms:
                if not (z > 0 and w > 0 and math.isfinite(z) and math.isfinite(w)):
                    raise ConfigurationError(f"atom ({z}, {w}) must have positive finite location and weight", ["mu.atoms"])
            object.__setattr__(self, "atoms", atoms)
        if self.variant in ("power_law", "tempered"):
            if not self.C > 0:
                raise ConfigurationError("density constant C must be positive", ["mu.C"])
            if not 1.0 < self.alpha < 2.0:
                raise ConfigurationError(
                    f"alpha={self.alpha} violates int (z ^ z^2) mu(dz) < inf; need 1 < alpha < 2", ["H", "mu.alpha"]
                )
        if self.variant == "power_law" and self.cutoff is not None and not self.cutoff > 0:
            raise ConfigurationError("cutoff must be positive", ["mu.cutoff"])
        if self.variant == "tempered":
            if not self.rate > 0:
                raise ConfigurationError("tempering rate must be positive", ["mu.rate"])
            if self.cutoff is not None:
                raise ConfigurationError("tempered measure takes no cutoff", ["mu.cutoff"])

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def atomic(cls, atoms):
        return cls("atoms", atoms=tuple(atoms))

    @classmethod
    def power_law(cls, C, alpha, cutoff=None):
        return cls("power_law", C=float(C), alpha=float(alpha), cutoff=None if cutoff is None else float(cutoff))

    @classmethod
    def tempered(cls, C, alpha, rate):
        return cls("tempered", C=float(C), alpha=float(alpha), rate=float(rate))

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        if self.variant == "none":
            return {"variant": "none"}
        if self.variant == "atoms":
            return {"variant": "atoms", "atoms": [[z, w] for z, w in self.atoms]}
        if self.variant == "power_law":
            return {"variant": "power_law", "C": self.C, "alpha": self.alpha, "cutoff": self.cutoff}
        return {"variant": "tempered", "C": self.C, "alpha": self.alpha, "rate": self.rate}

    @classmethod
    def from_dict(cls, d):
        try:
            variant = d["variant"]
            if variant == "none":
                return cls.none()
            if variant == "atoms":
                return cls.atomic(tuple(tuple(a) for a in d["atoms"]))
            if variant == "power_law":
                return cls.power_law(d["C"], d["alpha"], d.get("cutoff"))
            if variant == "tempered":
                return cls.tempered(d["C"], d["alpha"], d["rate"])
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed jump-measure definition: {exc}", ["mu"]) from exc
        raise ConfigurationError(f"unknown jump-measure variant {variant!r}", ["mu.variant"])

    # -- helpers -----------------------------------------------------------

    @property
    def is_density(self):
        return self.variant in ("power_law", "tempered")

    @property
    def upper(self):
        if self.variant == "power_law" and self.cutoff is not None:
            return self.cutoff
        return math.inf

    def _density(self, z):
        return self.C * z ** (-1.0 - self.alpha) * math.exp(-self.rate * z)

    def _atoms_above(self, lo):
        return [(z, w) for z, w in self.atoms if z >= lo]

    def _pieces(self, lo, breaks):
        hi = self.upper
        pts = sorted({p for p in breaks if lo < p < hi})
        edges = [lo, *pts, hi]
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            # decade breakpoints keep long finite ranges within quad's reach
            if a > 0 and math.isfinite(b) and b / a > 1e3:
                inner = np.geomspace(a, b, int(math.ceil(math.log10(b / a))) + 1)
                inner[0], inner[-1] = a, b
                out.extend(zip(inner[:-1].tolist(), inner[1:].tolist()))
            else:
                out.append((a, b))
        return out

    def _density_integral(self, fn, lo, breaks, name, tail=None):
        # tail(T) gives the piece over [T, inf) in closed form; used for the
        # untruncated power law, whose integrands decay too slowly for quad
        hi = self.upper
        if lo >= hi:
            return 0.0
        pieces = self._pieces(lo, breaks)
        total = 0.0
        if tail is not None and self.variant == "power_law" and math.isinf(hi):
            total += tail(pieces[-1][0])
            pieces = pieces[:-1]
        for a, b in pieces:
            total += _quad(lambda z: fn(z) * self._density(z), a, b, name)
        return total

    # closed forms over [T, inf) for C z^(-1-alpha), with lam * T >= 1

    def _tail_laplace(self, lam):
        a, C = self.alpha, self.C
        return lambda T: C * (lam**a * _upper_gamma(-a, lam * T) - T ** (-a) / a + lam * T ** (1 - a) / (a - 1))

    def _tail_derivative(self, lam):
        a, C = self.alpha, self.C
        return lambda T: C * (T ** (1 - a) / (a - 1) - lam ** (a - 1) * _upper_gamma(1 - a, lam * T))

    def _tail_loss(self, lam):
        a, C = self.alpha, self.C
        return lambda T: C * (T ** (-a) / a - lam**a * _upper_gamma(-a, lam * T))

    def _near_zero(self, smooth, a, name):
        # int_0^a smooth(z) z**(1-alpha) dz with an algebraic-weight rule
        return _quad(
            lambda z: self.C * smooth(z) * math.exp(-self.rate * z), 0.0, a, name, weight="alg", wvar=(1.0 - self.alpha, 0.0)
        )

    # -- integrals over [lo, inf) -------------------------------------------

    def mass(self, lo):
        """``mu([lo, inf))``; infinite for densities when ``lo == 0``."""
        if self.variant == "none":
            return 0.0
        if self.variant == "atoms":
            return math.fsum(w for z, w in self._atoms_above(lo))
        if lo <= 0:
            return math.inf
        if self.variant == "power_law":
            if lo >= self.upper:
                return 0.0
            tail = 0.0 if self.cutoff is None else self.cutoff ** (-self.alpha)
            return self.C / self.alpha * (lo ** (-self.alpha) - tail)
        return self._density_integral(lambda z: 1.0, lo, (1.0 / self.rate, 1.0), "mu([delta, inf))")

    def first_moment(self, lo):
        """``int_{z >= lo} z mu(dz)``."""
        if self.variant == "none":
            return 0.0
        if self.variant == "atoms":
            return math.fsum(z * w for z, w in self._atoms_above(lo))
        if lo <= 0:
            return math.inf
        if self.variant == "power_law":
            if lo >= self.upper:
                return 0.0
            tail = 0.0 if self.cutoff is None else self.cutoff ** (1.0 - self.alpha)
            return self.C / (self.alpha - 1.0) * (lo ** (1.0 - self.alpha) - tail)
        return self._density_integral(lambda z: z, lo, (1.0 / self.rate, 1.0), "int z mu(dz)")

    def laplace_integral(self, lam, lo=0.0):
        """``int_{z >= lo} (exp(-lam z) - 1 + lam z) mu(dz)``."""
        if self.variant == "none" or lam == 0:
            return 0.0
        if self.variant == "atoms":
            return math.fsum(w * phi2(lam * z) for z, w in self._atoms_above(lo))
        if self._stable_closed_form(lo):
            return self.C * special.gamma(-self.alpha) * lam**self.alpha
        return self._smooth_integral(
            lam, lo, lambda z: phi2(lam * z), lambda z: lam * lam * _phi2_over_sq(lam * z), "psi", self._tail_laplace(lam)
        )

    def laplace_derivative(self, lam, lo=0.0):
        """``int_{z >= lo} z (1 - exp(-lam z)) mu(dz)``, the lam-derivative of the above."""
        if self.variant == "none" or lam == 0:
            return 0.0
        if self.variant == "atoms":
            return math.fsum(w * z * -math.expm1(-lam * z) for z, w in self._atoms_above(lo))
        if self._stable_closed_form(lo):
            return self.C * self.alpha * special.gamma(-self.alpha) * lam ** (self.alpha - 1.0)
        return self._smooth_integral(
            lam, lo, lambda z: -z * math.expm1(-lam * z), lambda z: lam * _phi1_over_x(lam * z), "psi'", self._tail_derivative(lam)
        )

    def loss_integral(self, lam, lo):
        """``int_{z >= lo} (1 - exp(-lam z)) mu(dz)`` (finite only for ``lo > 0``)."""
        if self.variant == "none" or lam == 0:
            return 0.0
        if self.variant == "atoms":
            return math.fsum(-w * math.expm1(-lam * z) for z, w in self._atoms_above(lo))
        if lo <= 0:
            return math.inf
        breaks = (1.0 / lam, 1.0) + ((1.0 / self.rate,) if self.rate else ())
        return self._density_integral(
            lambda z: -math.expm1(-lam * z), lo, breaks, "int (1 - e^{-Nz}) mu(dz)", self._tail_loss(lam)
        )

    def _stable_closed_form(self, lo):
        return self.variant == "power_law" and self.cutoff is None and lo == 0

    def _smooth_integral(self, lam, lo, integrand, smooth_at_zero, name, tail=None):
        breaks = [1.0 / lam, 1.0]
        if self.rate:
            breaks.append(1.0 / self.rate)
        if lo > 0:
            return self._density_integral(integrand, lo, breaks, name, tail)
        a = min(1.0 / lam, 1.0, self.upper)
        return self._near_zero(smooth_at_zero, a, name) + self._density_integral(integrand, a, breaks, name, tail)

    def poisson_rates(self, N, lo, ks):
        """``(1/N) int_{z >= lo} (N z)**k / k! exp(-N z) mu(dz)`` for each ``k >= 2``.

        Densities reduce to regularized incomplete gamma functions, atoms to
        Poisson probabilities.
        """
        ks = np.asarray(ks, dtype=float)
        if self.variant == "none":
            return np.zeros_like(ks)
        if self.variant == "atoms":
            out = np.zeros_like(ks)
            for z, w in self._atoms_above(lo):
                out += w / N * stats.poisson.pmf(ks, N * z)
            return out
        hi = self.upper
        if lo >= hi:
            return np.zeros_like(ks)
        s = ks - self.alpha
        beta = N + self.rate
        x_lo, x_hi = beta * lo, beta * hi
        if math.isinf(hi):
            qdiff = special.gammaincc(s, x_lo)
        else:
            # differences of whichever tail is small, to avoid cancellation near 1
            upper = special.gammaincc(s, x_lo) - special.gammaincc(s, x_hi)
            lower = special.gammainc(s, x_hi) - special.gammainc(s, x_lo)
            qdiff = np.where(x_hi < s, lower, upper)
        with np.errstate(divide="ignore"):
            logr = (
                math.log(self.C)
                - math.log(N)
                + ks * math.log(N)
                - special.gammaln(ks + 1)
                - s * math.log(beta)
                + special.gammaln(s)
                + np.log(np.maximum(qdiff, 0.0))
            )
        return np.exp(logr)

    def sample(self, rng, lo, n):
        """Draw ``n`` i.i.d. sizes from ``mu`` restricted to ``[lo, inf)`` and normalized."""
        if n == 0:
            return np.empty(0)
        if self.variant == "none":
            raise ConfigurationError("cannot sample jumps from the zero measure", ["mu"])
        if self.variant == "atoms":
            sel = self._atoms_above(lo)
            if not sel:
                raise ConfigurationError(f"no atoms at or above delta={lo}", ["mu.atoms"])
            z = np.array([a[0] for a in sel])
            w = np.array([a[1] for a in sel])
            u = rng.random(n)
            idx = np.searchsorted(np.cumsum(w) / w.sum(), u, side="right")
            return z[np.minimum(idx, len(z) - 1)]
        if lo <= 0:
            raise ConfigurationError("delta must be positive for a density jump measure", ["delta"])
        a = self.alpha
        if self.variant == "power_law":
            u = rng.random(n)
            top = 0.0 if self.cutoff is None else self.cutoff ** (-a)
            return (lo ** (-a) - u * (lo ** (-a) - top)) ** (-1.0 / a)
        return self._sample_tempered(rng, lo, n)

    def _sample_tempered(self, rng, lo, n):
        # rejection from whichever proposal dominates the tighter factor
        a, th = self.alpha, self.rate
        out = np.empty(n)
        filled = 0
        pareto = th * lo < 1.0
        while filled < n:
            m = max(16, 2 * (n - filled))
            u = rng.random(m)
            if pareto:
                z = lo * u ** (-1.0 / a)
                accept = rng.random(m) < np.exp(-th * (z - lo))
            else:
                z = lo - np.log(u) / th
                accept = rng.random(m) < (z / lo) ** (-1.0 - a)
            z = z[accept][: n - filled]
            out[filled : filled + len(z)] = z
            filled += len(z)
        return out


# --------------------------------------------------------------------------
# mechanism and schedule


@dataclass(frozen=True)
class BranchingMechanism:
    """Drift ``b``, diffusion ``c`` and jump measure ``mu``.

    Assumption (H) requires ``c > 0``; ``unchecked=True`` admits ``c = 0``
    for drift-only test fixtures.
    """

    b: float = 0.0
    c: float = 1.0
    mu: JumpMeasure = field(default_factory=JumpMeasure.none)
    unchecked: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.b) and math.isfinite(self.c)):
            raise ConfigurationError("b and c must be finite", ["b", "c"])
        if self.c < 0:
            raise ConfigurationError("diffusion coefficient c must be nonnegative", ["H", "c"])
        if self.c == 0 and not self.unchecked:
            raise ConfigurationError("assumption (H) requires c > 0 (pass unchecked=True for fixtures)", ["H", "c"])

    def to_dict(self):
        return {"b": self.b, "c": self.c, "mu": self.mu.to_dict()}

    @classmethod
    def from_dict(cls, d, unchecked=False):
        try:
            return cls(float(d["b"]), float(d["c"]), JumpMeasure.from_dict(d.get("mu", {"variant": "none"})), unchecked)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed mechanism definition: {exc}", ["mechanism"]) from exc


@dataclass(frozen=True)
class TruncationSchedule:
    """Jump-truncation levels ``delta_N = N**(-theta)``."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ConfigurationError("schedule exponent theta must be positive", ["theta"])

    def delta(self, N):
        if N < 1:
            raise ConfigurationError(f"population scale N={N} must be >= 1", ["N"])
        return float(N) ** (-self.theta)

    def assumption_a(self, mech, N_grid):
        """Return ``(1/N) mu([delta_N, inf))`` on ``N_grid``.

        Raises :class:`ConfigurationError` unless the sequence is
        nonincreasing and ends strictly below where it started (or is
        identically zero).
        """
        vals = [mech.mu.mass(self.delta(N)) / N for N in N_grid]
        ok = all(v1 <= v0 for v0, v1 in zip(vals, vals[1:])) and (vals[-1] < vals[0] or max(vals) == 0.0)
        if len(vals) < 2 or not ok:
            raise ConfigurationError(
                f"assumption (A) not supported on N grid {list(N_grid)}: (1/N) mu([delta_N, inf)) = {vals}", ["A"]
            )
        return vals


def default_schedule(mech):
    """``theta = 1/(2 alpha)`` for power-law type measures, else 1/2."""
    if mech.mu.is_density:
        return TruncationSchedule(1.0 / (2.0 * mech.mu.alpha))
    return TruncationSchedule(0.5)


def mechanism_to_json(mech, schedule=None):
    d = mech.to_dict()
    if schedule is not None:
        d["theta"] = schedule.theta
    return json.dumps(d, sort_keys=True)


def mechanism_from_json(text, unchecked=False):
    """Parse ``{b, c, mu: {variant, ...}, theta}``; ``theta`` defaults per :func:`default_schedule`."""
    try:
        d = json.loads(text) if isinstance(text, str) else dict(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"mechanism JSON is not valid: {exc}", ["mechanism"]) from exc
    mech = BranchingMechanism.from_dict(d, unchecked=unchecked)
    schedule = TruncationSchedule(float(d["theta"])) if d.get("theta") is not None else default_schedule(mech)
    return mech, schedule


def mechanism_hash(mech, schedule=None):
    return hashlib.sha256(mechanism_to_json(mech, schedule).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# psi and friends


def _check_lambda(lam):
    if not lam >= 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    return float(lam)


def _check_delta(delta):
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return float(delta)


def psi(mech, lam):
    lam = _check_lambda(lam)
    return mech.b * lam + mech.c * lam * lam + mech.mu.laplace_integral(lam, 0.0)


def psi_delta(mech, delta, lam):
    """Truncated mechanism; note that it carries no ``b*lam`` term."""
    lam, delta = _check_lambda(lam), _check_delta(delta)
    return mech.c * lam * lam + mech.mu.laplace_integral(lam, delta)


def psi_prime(mech, lam):
    lam = _check_lambda(lam)
    return mech.b + 2.0 * mech.c * lam + mech.mu.laplace_derivative(lam, 0.0)


def psi_delta_prime(mech, delta, lam):
    lam, delta = _check_lambda(lam), _check_delta(delta)
    return 2.0 * mech.c * lam + mech.mu.laplace_derivative(lam, delta)


def _convex_inverse(f, fprime, alpha, what):
    # largest root of f(l) = alpha for convex f with f(0) = 0
    if fprime(0.0) >= 0:
        lo = 0.0
    else:
        hi = 1.0
        while fprime(hi) <= 0:
            hi *= 2.0
            if hi > 1e300:
                raise DomainError(f"{what} has no increasing branch")
        lo = optimize.brentq(fprime, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    fmin = f(lo)
    if alpha < fmin:
        raise DomainError(f"alpha={alpha} lies below min {what} = {fmin}")
    if alpha == fmin:
        return lo
    hi = max(2.0 * lo, 1.0)
    while f(hi) <= alpha:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError(f"{what} never reaches {alpha}")
    lam = optimize.brentq(lambda x: f(x) - alpha, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    for _ in range(3):
        d = fprime(lam)
        if d <= 0:
            break
        step = (f(lam) - alpha) / d
        if not math.isfinite(step) or lam - step < lo:
            break
        lam -= step
        if abs(step) <= 1e-16 * max(lam, 1.0):
            break
    return lam


def psi_inverse(mech, alpha, delta=None):
    """Largest ``lam`` with ``psi(lam) = alpha`` (or ``psi_delta`` if ``delta`` is given).

    The root is taken on the increasing branch, past the minimizer of the
    convex mechanism.
    """
    if delta is None:
        return _convex_inverse(lambda x: psi(mech, x), lambda x: psi_prime(mech, x), float(alpha), "psi")
    return _convex_inverse(
        lambda x: psi_delta(mech, delta, x), lambda x: psi_delta_prime(mech, delta, x), float(alpha), "psi_delta"
    )


def laplace_exponent_inverse(mech, delta, q):
    """Right inverse of ``l -> b*l + psi_delta(l)``, the Laplace exponent of the truncated Levy path."""
    return _convex_inverse(
        lambda x: mech.b * x + psi_delta(mech, delta, x),
        lambda x: mech.b + psi_delta_prime(mech, delta, x),
        float(q),
        "b*l + psi_delta",
    )


def u_flow(mech, lam, t, rtol=1e-11, atol=1e-13):
    """Solve ``du/dt = -psi(u)``, ``u(0) = lam`` with an adaptive RK4(5) pair.

    Returns ``u_t(lam)``; ``t`` may be a scalar or an increasing array of
    times (then an array is returned).
    """
    lam = _check_lambda(lam)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise DomainError("times must be nonnegative and nondecreasing")
    scalar = np.ndim(t) == 0
    if lam == 0 or times[-1] == 0:
        out = np.full(times.shape, lam)
        return float(out[0]) if scalar else out
    sol = integrate.solve_ivp(
        lambda _, u: [-psi(mech, max(u[0], 0.0))],
        (0.0, float(times[-1])),
        [lam],
        method="RK45",
        t_eval=times,
        rtol=rtol,
        atol=atol,
        first_step=min(1e-3, 0.1 / max(psi_prime(mech, lam), 1e-12), float(times[-1])),
    )
    if sol.status != 0:
        raise NumericFailure(f"u_flow integration failed: {sol.message}")
    out = np.maximum(sol.y[0], 0.0)
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# offspring law of the discrete-mass population


@dataclass(frozen=True)
class OffspringLaw:
    """Per-individual event rates of the rescaled Galton-Watson population.

    ``rates[l]`` is the rate at which an individual dies leaving ``l``
    children; ``total_rate`` is ``psi_delta'(N)`` and ``pmf = rates /
    total_rate``.  Tail mass beyond ``K`` is lumped into ``rates[K]``.
    """

    N: int
    delta: float
    total_rate: float
    rates: np.ndarray
    pmf: np.ndarray
    cdf: np.ndarray
    residual: float

    @property
    def K(self):
        return len(self.rates) - 1

    def rate_zero_expanded(self, mech):
        """The zero-offspring rate written as ``cN + int z mu - (1/N) int (1 - e^{-Nz}) mu``."""
        N, d = self.N, self.delta
        return mech.c * N + mech.mu.first_moment(d) - mech.mu.loss_integral(N, d) / N

    def mean(self):
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))


def _thin_tail_start(mu, N):
    # index past which the rates of a bounded measure decay super-exponentially
    if mu.variant == "atoms":
        return 2 * N * max(z for z, _ in mu.atoms) + 100
    if mu.variant == "none" or math.isinf(mu.upper):
        return math.inf
    return 2 * N * mu.upper + 100


def offspring_law(mech, schedule, N):
    """Offspring law with generating function ``s + psi_d((1-s)N) / (N psi_d'(N))``."""
    N = int(N)
    delta = schedule.delta(N)
    total = psi_delta_prime(mech, delta, N)
    r0 = psi_delta(mech, delta, N) / N
    chunk = 1024
    k_floor = _thin_tail_start(mech.mu, N)
    pieces = [np.array([r0, 0.0])]
    acc = r0
    k = 2
    residual = 1.0
    while True:
        ks = np.arange(k, k + chunk)
        r = mech.mu.poisson_rates(N, delta, ks)
        if k == 2:
            r[0] += mech.c * N
        cums = acc + np.cumsum(r)
        res = (total - cums) / total
        hit = np.nonzero(res < OFFSPRING_RESIDUAL)[0]
        if len(hit):
            j = int(hit[0])
            pieces.append(r[: j + 1])
            residual = float(res[j])
            break
        tail_small = ks[-1] > k_floor and r[-1] < 1e-18 * total
        if tail_small and res[-1] < 1e-9:
            # numerical floor of the closed forms: the rest is rounding noise
            pieces.append(r)
            residual = float(res[-1])
            break
        pieces.append(r)
        acc = float(cums[-1])
        k += chunk
        if k > OFFSPRING_MAX_K:
            raise ConfigurationError(
                f"offspring tail mass {res[-1]:.3g} still above {OFFSPRING_RESIDUAL} at K={OFFSPRING_MAX_K}; "
                "use a jump measure with an upper cutoff",
                ["offspring_cutoff"],
            )
    rates = np.concatenate(pieces)
    if residual < -1e-9:
        raise NumericFailure(f"offspring rates overshoot psi_delta'(N) by {-residual:.3g} (relative)")
    rates[-1] += max(residual, 0.0) * total
    pmf = rates / total
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    return OffspringLaw(N, delta, total, rates, pmf, cdf, residual)
