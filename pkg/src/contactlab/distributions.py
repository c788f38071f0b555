"""Degree distributions on the nonnegative integers.

A :class:`DegreeDistribution` is a finite pmf. Named families (Poisson,
geometric) are truncated where the upper tail drops below ``1e-12`` and
renormalised, so every downstream computation is exact finite arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import special, stats

TAIL_CUTOFF = 1e-12
LAMBDA_MAX = 0.3


class DistributionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """Probability mass function on a finite set of nonnegative integers.

    Parameters
    ----------
    support : array of int
        Strictly increasing atoms.
    mass : array of float
        Probabilities, same length as ``support``.
    kind : str
        Family tag (``"poisson"``, ``"geometric"``, ``"point"`` or ``"pmf"``).
    params : dict
        Family parameters, echoed into manifests.
    """

    support: np.ndarray
    mass: np.ndarray
    kind: str = "pmf"
    params: Mapping = None

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64).ravel()
        mass = np.asarray(self.mass, dtype=float).ravel()
        if support.size == 0 or support.shape != mass.shape:
            raise DistributionError("support and mass must be nonempty and of equal length")
        if np.any(support < 0) or np.any(np.diff(support) <= 0):
            raise DistributionError("support must be strictly increasing nonnegative integers")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise DistributionError("masses must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > 1e-12:
            raise DistributionError(f"masses sum to {mass.sum()!r}, not 1")
        keep = mass > 0
        support, mass = support[keep], mass[keep]
        support.setflags(write=False)
        mass.setflags(write=False)
        cdf = np.cumsum(mass)
        cdf.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "params", dict(self.params or {}))
        object.__setattr__(self, "_cdf", cdf)

    # -- queries --------------------------------------------------------
    @property
    def kmax(self) -> int:
        return int(self.support[-1])

    def pmf(self, k):
        """Mass at ``k`` (scalar or array)."""
        k = np.asarray(k)
        idx = np.searchsorted(self.support, k)
        idx = np.clip(idx, 0, self.support.size - 1)
        out = np.where(self.support[idx] == k, self.mass[idx], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, k):
        """P(D <= k)."""
        k = np.asarray(k)
        idx = np.searchsorted(self.support, k, side="right")
        padded = np.concatenate(([0.0], self._cdf))
        out = np.minimum(padded[idx], 1.0)
        return float(out) if out.ndim == 0 else out

    def tail(self, a) -> float:
        """mu[a, inf) = P(D >= a)."""
        return float(self.mass[self.support >= a].sum())

    def moment(self, j: int) -> float:
        return float(np.dot(self.mass, self.support.astype(float) ** j))

    def mean(self) -> float:
        return self.moment(1)

    def second_moment(self) -> float:
        return self.moment(2)

    def log_exp_moment(self, c: float) -> float:
        """log E[exp(c D)], computed stably."""
        if c == 0:
            return 0.0
        return float(special.logsumexp(c * self.support, b=self.mass))

    def exp_moment(self, c: float) -> float:
        """E[exp(c D)]; equal to 1 exactly at ``c = 0``."""
        if c == 0:
            return 1.0
        return math.exp(self.log_exp_moment(c))

    def sample(self, rng: np.random.Generator, size=None):
        """Draw i.i.d. samples by inverse transform."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u * self._cdf[-1], side="right")
        idx = np.minimum(idx, self.support.size - 1)
        out = self.support[idx]
        return int(out) if np.ndim(out) == 0 else out

    def as_dict(self) -> dict:
        return {int(k): float(p) for k, p in zip(self.support, self.mass)}

    def describe(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "kmax": self.kmax}

    def __repr__(self):
        return f"DegreeDistribution({self.kind}, {self.params}, atoms={self.support.size})"


# -- constructors -----------------------------------------------------------

def _normalised(support, mass, kind, params):
    mass = np.asarray(mass, dtype=float)
    return DegreeDistribution(np.asarray(support), mass / mass.sum(), kind, params)


def _cutoff(sf, cutoff):
    if cutoff is not None:
        if cutoff < 0:
            raise DistributionError("cutoff must be nonnegative")
        return int(cutoff)
    k = 0
    while sf(k) >= TAIL_CUTOFF:
        k += 1
    return k


def poisson(mean: float, cutoff: int | None = None) -> DegreeDistribution:
    """Poisson(mean) truncated to ``0..cutoff`` and renormalised.

    The default cutoff is the smallest ``k`` with ``P(D > k) < 1e-12``.
    """
    if not (mean >= 0 and math.isfinite(mean)):
        raise DistributionError("Poisson mean must be finite and nonnegative")
    if mean == 0:
        return point(0)
    kmax = _cutoff(lambda k: stats.poisson.sf(k, mean), cutoff)
    ks = np.arange(kmax + 1)
    return _normalised(ks, stats.poisson.pmf(ks, mean), "poisson",
                       {"mean": float(mean), "cutoff": kmax})


def geometric(p: float, cutoff: int | None = None) -> DegreeDistribution:
    """Number of failures before the first success, P(k) = (1-p)^k p."""
    if not 0 < p <= 1:
        raise DistributionError("geometric success probability must lie in (0, 1]")
    if p == 1:
        return point(0)
    kmax = _cutoff(lambda k: (1 - p) ** (k + 1), cutoff)
    ks = np.arange(kmax + 1)
    return _normalised(ks, p * (1 - p) ** ks, "geometric", {"p": float(p), "cutoff": kmax})


def point(k: int) -> DegreeDistribution:
    if k < 0:
        raise DistributionError("point mass must sit at a nonnegative integer")
    return DegreeDistribution(np.array([k]), np.array([1.0]), "point", {"k": int(k)})


def from_pmf(pmf: Mapping, tol: float = 1e-9) -> DegreeDistribution:
    """Explicit pmf given as ``{k: p}``; keys may be strings (JSON)."""
    items = sorted((int(k), float(v)) for k, v in pmf.items())
    if not items:
        raise DistributionError("empty pmf")
    ks = np.array([k for k, _ in items])
    ps = np.array([v for _, v in items])
    if np.any(ps < 0):
        raise DistributionError("negative mass in pmf")
    if abs(ps.sum() - 1.0) > tol:
        raise DistributionError(f"pmf masses sum to {ps.sum()}, not 1")
    if len(set(ks.tolist())) != ks.size:
        raise DistributionError("duplicate atoms in pmf")
    return _normalised(ks, ps, "pmf", {"pmf": {str(k): v for k, v in items}})


def load_distribution(spec: Mapping) -> DegreeDistribution:
    """Build a distribution from its JSON description.

    Accepted forms: ``{"family": "poisson", "mean": 4.0}``,
    ``{"family": "geometric", "p": 0.3}``, ``{"family": "point", "k": 3}``
    and ``{"pmf": {"1": 0.5, "3": 0.5}}``. An optional ``cutoff`` key applies
    to the named families.
    """
    if "pmf" in spec:
        return from_pmf(spec["pmf"])
    family = spec.get("family")
    cutoff = spec.get("cutoff")
    if family == "poisson":
        return poisson(float(spec["mean"]), cutoff)
    if family == "geometric":
        return geometric(float(spec["p"]), cutoff)
    if family == "point":
        return point(int(spec["k"]))
    raise DistributionError(f"unknown distribution family {family!r}")


# -- transformations ----------------------------------------------------------

def size_biased(mu: DegreeDistribution, conditioned: bool = False) -> DegreeDistribution:
    """Offspring law of non-root vertices: mu~(k-1) = k mu(k) / E D.

    With ``conditioned=True`` the result is restricted to ``[1, inf)`` and
    renormalised.
    """
    d = mu.mean()
    if d <= 0:
        raise DistributionError("size-biasing needs a distribution with positive mean")
    keep = mu.support >= 1
    ks = mu.support[keep]
    w = ks * mu.mass[keep] / d
    ks = ks - 1
    if conditioned:
        pos = ks >= 1
        if not pos.any():
            raise DistributionError("conditioned size-biased law is empty")
        ks, w = ks[pos], w[pos]
    return _normalised(ks, w, "size_biased", {"base": mu.describe(), "conditioned": conditioned})


def augmented_threshold(mu: DegreeDistribution, eps: float) -> int:
    """k0 = max{k : sum_{j >= k} j sqrt(p_j) >= eps/10} (0 if the set is empty)."""
    terms = mu.support * np.sqrt(mu.mass)
    tails = np.cumsum(terms[::-1])[::-1]  # tail sums starting at each atom
    ok = np.nonzero(tails >= eps / 10)[0]
    if ok.size == 0:
        return 0
    # between atoms the tail sum is constant, so the largest integer with the
    # property is the atom itself
    return int(mu.support[ok[-1]])


def augmented(mu: DegreeDistribution, eps: float) -> DegreeDistribution:
    """Augmented law: halve the bulk below k0 and take square roots above.

    If ``k0 < kmax`` the weights are ``p_k/2`` for ``k <= k0`` and ``sqrt(p_k)``
    beyond; if ``k0 == kmax`` they are ``p_k/2`` for ``k < k0`` and
    ``sqrt(p_k0)`` at ``k0``. The result is renormalised and stochastically
    dominates ``mu``.
    """
    if not 0 < eps < 1:
        raise DistributionError("eps must lie in (0, 1)")
    k0 = augmented_threshold(mu, eps)
    ks, p = mu.support, mu.mass
    if k0 < mu.kmax:
        w = np.where(ks <= k0, p / 2, np.sqrt(p))
    else:
        w = np.where(ks < k0, p / 2, np.sqrt(p))
    return _normalised(ks, w, "augmented", {"base": mu.describe(), "eps": eps, "k0": k0})


def supercriticality(mu: DegreeDistribution) -> float:
    """E[D(D-2)]; positive exactly when the configuration model has a giant component."""
    return mu.second_moment() - 2 * mu.mean()


# -- tail profile -------------------------------------------------------------

@dataclass(frozen=True)
class TailProfile:
    """Constants of the recursive tail bound and the envelope ``f``.

    ``A = log E e^{3D} + 2e``, ``c = 1/A``, ``B = 24A``,
    ``q = c / (16 lam^2 log(1/lam))`` and
    ``p = (B lam)^{-q} exp(-c lam^{-2} / B)``.
    """

    A: float
    c: float
    B: float
    q: float
    p: float
    lam: float

    @property
    def t_min(self) -> float:
        return self.A * self.lam

    @property
    def t_switch(self) -> float:
        return 1.0 / (self.B * self.lam)

    def f(self, t):
        """Envelope f(t) for t >= A lam (vectorised)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min * (1 - 1e-12)):
            raise ValueError(f"f is only defined for t >= A*lam = {self.t_min}")
        lam, c, B = self.lam, self.c, self.B
        with np.errstate(over="ignore", divide="ignore"):
            expo = np.exp(-c * t / lam)
            logs = np.log(np.e * B * np.maximum(t, self.t_switch) * lam)
            power = self.p * np.maximum(t, self.t_switch) ** (-self.q) / logs**2
        out = np.where(t <= self.t_switch, expo, power)
        return float(out) if out.ndim == 0 else out

    def good_tail(self, tail_prob, t) -> bool:
        return bool(np.all(np.asarray(tail_prob) <= self.f(t)))

    def strong_tail(self, tail_prob, t) -> bool:
        return bool(np.all(np.asarray(tail_prob) <= self.f(3 * np.asarray(t)) / 3))

    def as_dict(self) -> dict:
        return {"A": self.A, "c": self.c, "B": self.B, "q": self.q, "p": self.p, "lambda": self.lam}


def make_tail_profile(mu: DegreeDistribution, lam: float, lam_max: float = LAMBDA_MAX,
                      q: float | None = None) -> TailProfile:
    """Tail-bound constants for offspring law ``mu`` at infection rate ``lam``.

    Parameters
    ----------
    lam_max : float
        Guard on ``lam``; the bound is only meaningful for small rates.
    q : float, optional
        Override of the default exponent ``c / (16 lam^2 log(1/lam))``.
    """
    if not 0 < lam < min(lam_max, 1.0):
        raise DistributionError(f"lambda={lam} outside (0, {lam_max}) (guard lam_max={lam_max})")
    log_m3 = mu.log_exp_moment(3.0)
    if not math.isfinite(log_m3):
        raise DistributionError("E exp(3D) is not finite")
    A = log_m3 + 2 * math.e
    c = 1.0 / A
    B = 24.0 * A
    if q is None:
        q = c / (16 * lam**2 * math.log(1 / lam))
    p = (B * lam) ** (-q) * math.exp(-c / (lam**2 * B))
    return TailProfile(A=A, c=c, B=B, q=q, p=p, lam=lam)
