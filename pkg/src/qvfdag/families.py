"""Quadratic-variance-function families and ancestral sampling.

Every family here satisfies ``Var(X) = beta0 * E(X) + beta1 * E(X)**2``.
The natural-parameter conventions are:

=================  ====================  ==============================
family             natural parameter     mean ``A'(eta)``
=================  ====================  ==============================
poisson            log rate              ``exp(eta)``
binomial(N)        logit of success p    ``N * expit(eta)``
geometric          ``log(1 - p)``        ``e / (1 - e)``, ``e = exp(eta)``
negbin(R)          ``log(1 - p)``        ``R * e / (1 - e)``
exponential        ``-rate``             ``-1 / eta``
gamma(alpha)       ``-rate``             ``-alpha / eta``
=================  ====================  ==============================

Geometric and negative binomial count failures before the first (R-th)
success, so ``eta < 0``.  Generalized Poisson is supported for the
omega transformation only.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.special import expit

from .errors import DegenerateOmega, DomainError, UnsupportedSampling

__all__ = [
    "QvfFamily",
    "poisson",
    "binomial",
    "geometric",
    "negative_binomial",
    "exponential",
    "gamma",
    "generalized_poisson",
    "family_from_spec",
    "omega",
    "sample_node",
    "sample_dataset",
    "OMEGA_EPS",
]

OMEGA_EPS = 1e-8

_NAMES = (
    "poisson",
    "binomial",
    "geometric",
    "negbin",
    "exponential",
    "gamma",
    "genpoisson",
)
_NEGATIVE_DOMAIN = ("geometric", "negbin", "exponential", "gamma")
_COUNT_FAMILIES = ("poisson", "binomial", "geometric", "negbin", "genpoisson")


@dataclass(frozen=True)
class QvfFamily:
    """A node-conditional distribution with a quadratic variance function.

    ``shape`` carries the family's fixed parameter: trial count N for the
    binomial, R for the negative binomial, alpha for the gamma and
    lambda2 for the generalized Poisson.  It is ignored otherwise.
    Use the module-level constructors rather than building this directly.
    """

    name: str
    beta0: float
    beta1: float
    shape: float | None = None

    def __post_init__(self):
        if self.name not in _NAMES:
            raise ValueError(f"unknown family {self.name!r}")
        if not self.beta1 > -1:
            raise ValueError(
                f"beta1 must exceed -1 for identifiability, got {self.beta1}"
            )

    @property
    def is_count(self) -> bool:
        return self.name in _COUNT_FAMILIES

    @property
    def label(self) -> str:
        if self.shape is None:
            return self.name
        shape = int(self.shape) if float(self.shape).is_integer() else self.shape
        return f"{self.name}({shape})"

    def in_domain(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.name in _NEGATIVE_DOMAIN:
            return eta < 0
        return np.isfinite(eta)

    def _check_domain(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.name == "genpoisson":
            raise UnsupportedSampling(
                "generalized Poisson has no natural-exponential-family form here"
            )
        if not np.all(self.in_domain(eta)):
            raise DomainError(f"eta outside the natural-parameter domain of {self.label}")
        return eta

    def log_partition(self, eta):
        """Cumulant function ``A(eta)``."""
        eta = self._check_domain(eta)
        name = self.name
        if name == "poisson":
            return np.exp(eta)
        if name == "binomial":
            return self.shape * np.logaddexp(0.0, eta)
        if name == "geometric":
            return -np.log(-np.expm1(eta))
        if name == "negbin":
            return -self.shape * np.log(-np.expm1(eta))
        if name == "exponential":
            return -np.log(-eta)
        return -self.shape * np.log(-eta)  # gamma

    def mean(self, eta):
        """Conditional mean ``A'(eta)``."""
        eta = self._check_domain(eta)
        name = self.name
        if name == "poisson":
            return np.exp(eta)
        if name == "binomial":
            return self.shape * expit(eta)
        if name in ("geometric", "negbin"):
            r = 1.0 if name == "geometric" else self.shape
            return r * np.exp(eta) / -np.expm1(eta)
        if name == "exponential":
            return -1.0 / eta
        return -self.shape / eta

    def variance(self, eta):
        """``A''(eta)``, the conditional variance."""
        eta = self._check_domain(eta)
        name = self.name
        if name == "poisson":
            return np.exp(eta)
        if name == "binomial":
            s = expit(eta)
            return self.shape * s * (1.0 - s)
        if name in ("geometric", "negbin"):
            r = 1.0 if name == "geometric" else self.shape
            return r * np.exp(eta) / np.expm1(eta) ** 2
        if name == "exponential":
            return 1.0 / eta**2
        return self.shape / eta**2

    def eta_from_mean(self, mu):
        """Inverse of :meth:`mean`; ``mu`` must lie inside the mean space."""
        mu = np.asarray(mu, dtype=float)
        name = self.name
        if name == "poisson":
            return np.log(mu)
        if name == "binomial":
            return np.log(mu) - np.log(self.shape - mu)
        if name in ("geometric", "negbin"):
            r = 1.0 if name == "geometric" else self.shape
            return np.log(mu) - np.log(r + mu)
        if name == "exponential":
            return -1.0 / mu
        if name == "gamma":
            return -self.shape / mu
        raise UnsupportedSampling("generalized Poisson has no natural parameter here")

    def clip_mean(self, mu, eps=1e-3):
        """Pull a sample mean strictly inside the mean space."""
        lo = eps
        if self.name == "binomial":
            return float(np.clip(mu, lo, self.shape - lo))
        return float(max(mu, lo))

    def omega(self, mean, eps: float = OMEGA_EPS):
        return omega(self, mean, eps)


def poisson() -> QvfFamily:
    return QvfFamily("poisson", 1.0, 0.0)


def binomial(N: int) -> QvfFamily:
    if N < 1 or int(N) != N:
        raise ValueError(f"binomial trial count must be a positive integer, got {N}")
    if N == 1:
        raise ValueError("Bernoulli nodes (beta1 = -1) are not identifiable")
    return QvfFamily("binomial", 1.0, -1.0 / N, float(N))


def geometric() -> QvfFamily:
    return QvfFamily("geometric", 1.0, 1.0)


def negative_binomial(R: float) -> QvfFamily:
    if not R > 0:
        raise ValueError(f"negative binomial R must be positive, got {R}")
    return QvfFamily("negbin", 1.0, 1.0 / R, float(R))


def exponential() -> QvfFamily:
    return QvfFamily("exponential", 0.0, 1.0)


def gamma(alpha: float) -> QvfFamily:
    if not alpha > 0:
        raise ValueError(f"gamma shape must be positive, got {alpha}")
    return QvfFamily("gamma", 0.0, 1.0 / alpha, float(alpha))


def generalized_poisson(lambda2: float) -> QvfFamily:
    if not 0 <= lambda2 < 1:
        raise ValueError(f"generalized Poisson lambda2 must lie in [0, 1), got {lambda2}")
    b0 = 1.0 / (1.0 - lambda2) ** 2
    return QvfFamily("genpoisson", b0, 0.0, float(lambda2))


_SHAPE_KEYS = {"binomial": "N", "negbin": "R", "gamma": "alpha", "genpoisson": "lambda2"}
_ALIASES = {
    "negative_binomial": "negbin",
    "generalized_poisson": "genpoisson",
}


def family_from_spec(spec) -> QvfFamily:
    """Build a family from a config value.

    Accepts a family, a bare name (``"poisson"``) or a mapping such as
    ``{"name": "binomial", "N": 4}``.
    """
    if isinstance(spec, QvfFamily):
        return spec
    if isinstance(spec, str):
        spec = {"name": spec}
    name = _ALIASES.get(spec["name"].lower(), spec["name"].lower())
    if name == "poisson":
        return poisson()
    if name == "geometric":
        return geometric()
    if name == "exponential":
        return exponential()
    key = _SHAPE_KEYS.get(name)
    if key is None:
        raise ValueError(f"unknown family {spec['name']!r}")
    if key not in spec:
        raise ValueError(f"family {name!r} needs parameter {key!r}")
    value = spec[key]
    if name == "binomial":
        return binomial(int(value))
    if name == "negbin":
        return negative_binomial(float(value))
    if name == "gamma":
        return gamma(float(value))
    return generalized_poisson(float(value))


def family_to_spec(fam: QvfFamily) -> dict:
    out = {"name": fam.name}
    if fam.name in _SHAPE_KEYS:
        value = fam.shape
        out[_SHAPE_KEYS[fam.name]] = int(value) if fam.name == "binomial" else value
    return out


def omega(fam: QvfFamily, mean, eps: float = OMEGA_EPS) -> float:
    """Scaling that equalises conditional variance and mean.

    Raises :class:`DegenerateOmega` when ``beta0 + beta1 * mean`` is
    within ``eps`` of zero.
    """
    denom = fam.beta0 + fam.beta1 * mean
    if abs(denom) < eps:
        raise DegenerateOmega(
            f"beta0 + beta1*mean = {denom:.3g} for {fam.label} at mean {mean:.6g}"
        )
    return 1.0 / denom


def _draw(fam: QvfFamily, eta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    name = fam.name
    if name in ("genpoisson", "gamma"):
        raise UnsupportedSampling(f"sampling is not provided for {fam.label}")
    if name == "poisson":
        return np.asarray(rng.poisson(np.exp(eta)), dtype=float)
    if name == "binomial":
        return np.asarray(rng.binomial(int(fam.shape), expit(eta)), dtype=float)
    if name == "geometric":
        # numpy counts trials; failures = trials - 1
        return np.asarray(rng.geometric(-np.expm1(eta)), dtype=float) - 1.0
    if name == "negbin":
        return np.asarray(rng.negative_binomial(fam.shape, -np.expm1(eta)), dtype=float)
    return np.asarray(rng.exponential(-1.0 / eta), dtype=float)


def sample_node(fam: QvfFamily, eta, rng: np.random.Generator):
    """Draw from ``fam`` at natural parameter ``eta`` (scalar or array)."""
    eta_arr = fam._check_domain(eta) if fam.name != "genpoisson" else None
    if eta_arr is None:
        raise UnsupportedSampling(f"sampling is not provided for {fam.label}")
    out = _draw(fam, eta_arr, rng)
    if np.ndim(eta) == 0:
        return float(out)
    return out


def _per_node(families, p: int) -> list[QvfFamily]:
    if isinstance(families, (QvfFamily, str, dict)):
        return [family_from_spec(families)] * p
    fams = [family_from_spec(f) for f in families]
    if len(fams) != p:
        raise ValueError(f"expected {p} node families, got {len(fams)}")
    return fams


def sample_dataset(dag, families, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ancestral sampling of ``n`` rows from a QVF DAG.

    Nodes are filled column by column in topological order, so each
    column is one vectorised draw.  ``families`` is one family for all
    nodes or a per-node sequence.
    """
    p = dag.p
    fams = _per_node(families, p)
    X = np.zeros((n, p), dtype=float)
    theta = dag.theta
    with np.errstate(over="ignore"):
        for j in dag.topological_order():
            pa = sorted(dag.parents(j))
            eta = np.full(n, theta[j, j])
            if pa:
                eta = eta + X[:, pa] @ theta[j, pa]
            fam = fams[j]
            bad = ~fam.in_domain(eta)
            if fam.name == "poisson":
                bad |= eta > 700
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                raise DomainError(
                    f"eta={eta[i]:.4g} out of domain for {fam.label} at row {i}, node {j}"
                )
            X[:, j] = _draw(fam, eta, rng)
    return X


def check_count_matrix(X, families=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"count matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("count matrix has non-finite entries")
    if families is not None:
        fams = _per_node(families, X.shape[1])
        for j, fam in enumerate(fams):
            if fam.is_count and np.any(X[:, j] < 0):
                raise ValueError(f"column {j} has negative values for {fam.label}")
    return X

