"""Synthetic data panels with exact control of dependence, tails and offsets.

A panel is a p-by-n matrix whose row i holds the n observations of test i.
The n observation columns are independent and identically distributed; down
each column the sequence over tests is kappa-dependent, following one of
three models:

``iid``
    cells drawn independently from the innovation law;
``gaussian-kdep``
    each column is a stationary Gaussian sequence built by filtering
    shared standard-normal drivers with kappa + 1 weights solved once per
    spec from the banded Toeplitz correlation equations, so the requested
    lag correlations hold exactly and variables more than kappa apart are
    independent;
``moving-average``
    each column is the normalized sliding-window sum
    ``kappa^{-1/2} (eps_{i+1} + ... + eps_{i+kappa})`` of independent
    innovations from the chosen law, with implied lag-m correlation
    ``max(kappa - m, 0) / kappa``.

All innovation laws are standardized to mean 0 and variance 1 with finite
third absolute moment.  Mean offsets d_i >= 0 are added after the
dependent noise is built, so each cell has variance 1 and mean d_i
exactly in law.

Generation is pure: a panel is a deterministic function of
(spec, seed, replicate), with one splittable random stream per
(seed, replicate) pair and a fixed draw order, so disjoint replicates can
be generated concurrently in any schedule.
"""

from __future__ import annotations

import configparser
import io
import math
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cholesky_banded

from exceedlab.studentize import WeightConstraints, check_weights

__all__ = [
    "DependenceModel",
    "InnovationLaw",
    "Panel",
    "PanelFileHeader",
    "PanelSpec",
    "SpecError",
    "generate",
    "ma_filter_weights",
    "panel_spec_from_config",
    "panel_spec_to_config",
    "read_panel",
    "sample_row_pairs",
    "sample_rows",
    "standardized_law_moments",
    "stream",
    "write_panel",
]

LAW_KINDS = (
    "standard-normal",
    "standardized-pareto",
    "standardized-rademacher",
    "two-point-with-atom",
)
MODEL_KINDS = ("iid", "gaussian-kdep", "moving-average")


class SpecError(ValueError):
    """An invalid panel specification, with a human-readable diagnostic."""


# ---------------------------------------------------------------------------
# Innovation laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnovationLaw:
    """A standardized innovation distribution (mean 0, variance 1).

    ``standardized-pareto`` carries the tail exponent a > 3 of the
    underlying Pareto(a, minimum 1) before standardization;
    ``two-point-with-atom`` places probability ``atom`` on 0 and splits
    the rest evenly between +/- (1 - atom)^{-1/2}, keeping the atom at
    zero exactly (a location shift would destroy it).
    """

    kind: str
    tail_exponent: float | None = None
    atom: float | None = None

    @classmethod
    def normal(cls) -> "InnovationLaw":
        return cls("standard-normal")

    @classmethod
    def pareto(cls, tail_exponent: float) -> "InnovationLaw":
        return cls("standardized-pareto", tail_exponent=float(tail_exponent))

    @classmethod
    def rademacher(cls) -> "InnovationLaw":
        return cls("standardized-rademacher")

    @classmethod
    def two_point(cls, atom: float) -> "InnovationLaw":
        return cls("two-point-with-atom", atom=float(atom))

    def validate(self) -> None:
        if self.kind not in LAW_KINDS:
            raise SpecError(f"unknown innovation law {self.kind!r}")
        if self.kind == "standardized-pareto":
            if self.tail_exponent is None or not self.tail_exponent > 3.0:
                raise SpecError(
                    "pareto tail exponent must be strictly greater than 3, "
                    f"got {self.tail_exponent!r}"
                )
        if self.kind == "two-point-with-atom":
            if self.atom is None or not 0.0 < self.atom < 1.0:
                raise SpecError(
                    f"zero-atom probability must lie in (0, 1), got {self.atom!r}"
                )

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "standard-normal"

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Draw standardized innovations of the given shape."""
        if self.kind == "standard-normal":
            return rng.standard_normal(shape)
        if self.kind == "standardized-pareto":
            a = self.tail_exponent
            mu = a / (a - 1.0)
            sigma = math.sqrt(a / ((a - 1.0) ** 2 * (a - 2.0)))
            u = rng.random(shape)
            return ((1.0 - u) ** (-1.0 / a) - mu) / sigma
        if self.kind == "standardized-rademacher":
            return rng.integers(0, 2, shape).astype(float) * 2.0 - 1.0
        if self.kind == "two-point-with-atom":
            delta = self.atom
            c = 1.0 / math.sqrt(1.0 - delta)
            u = rng.random(shape)
            out = np.where(u < delta, 0.0, np.where(u < 0.5 + 0.5 * delta, -c, c))
            return out
        raise SpecError(f"unknown innovation law {self.kind!r}")


def standardized_law_moments(law: InnovationLaw) -> tuple[float, float, float]:
    """Closed-form (mean, variance, third absolute moment) of the law.

    Every supported law is standardized, so the first two entries are
    always (0, 1); the third absolute moment is:

    * standard normal: 2 sqrt(2/pi),
    * standardized Pareto(a): E|P - mu|^3 / sigma^3 with the split-at-mu
      power integrals in closed form,
    * Rademacher: 1,
    * two-point with atom delta: (1 - delta)^{-1/2}.
    """
    law.validate()
    if law.kind == "standard-normal":
        return (0.0, 1.0, 2.0 * math.sqrt(2.0 / math.pi))
    if law.kind == "standardized-rademacher":
        return (0.0, 1.0, 1.0)
    if law.kind == "two-point-with-atom":
        return (0.0, 1.0, 1.0 / math.sqrt(1.0 - law.atom))
    a = law.tail_exponent
    mu = a / (a - 1.0)
    sigma2 = a / ((a - 1.0) ** 2 * (a - 2.0))
    # E(P - mu)^3 over [mu, inf): powers of mu against the Pareto density.
    j_plus = (
        a
        * mu ** (3.0 - a)
        * (1.0 / (a - 3.0) - 3.0 / (a - 2.0) + 3.0 / (a - 1.0) - 1.0 / a)
    )
    # E(mu - P)^3 over [1, mu).
    j_minus = (
        -(mu ** 3) * (mu ** (-a) - 1.0)
        + 3.0 * mu * mu * a * (mu ** (1.0 - a) - 1.0) / (a - 1.0)
        - 3.0 * mu * a * (mu ** (2.0 - a) - 1.0) / (a - 2.0)
        + a * (mu ** (3.0 - a) - 1.0) / (a - 3.0)
    )
    return (0.0, 1.0, (j_plus + j_minus) / sigma2 ** 1.5)


# ---------------------------------------------------------------------------
# Dependence models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DependenceModel:
    """How the column sequence over tests is correlated.

    ``rho`` holds the lag-1..kappa correlations for ``gaussian-kdep``;
    the other kinds derive their correlations from ``kappa`` alone.
    """

    kind: str
    kappa: int = 0
    rho: tuple[float, ...] = ()

    @classmethod
    def iid(cls) -> "DependenceModel":
        return cls("iid", kappa=0)

    @classmethod
    def gaussian_kdep(cls, rho) -> "DependenceModel":
        rho = tuple(float(r) for r in rho)
        return cls("gaussian-kdep", kappa=len(rho), rho=rho)

    @classmethod
    def moving_average(cls, kappa: int) -> "DependenceModel":
        return cls("moving-average", kappa=int(kappa))

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise SpecError(f"unknown dependence model {self.kind!r}")
        if self.kind == "iid":
            if self.kappa != 0 or self.rho:
                raise SpecError("iid model takes no kappa or correlations")
        elif self.kind == "gaussian-kdep":
            if len(self.rho) != self.kappa or self.kappa < 1:
                raise SpecError(
                    "gaussian-kdep needs a lag-correlation vector of length kappa >= 1"
                )
            bad = [r for r in self.rho if not 0.0 <= r < 1.0]
            if bad:
                raise SpecError(
                    f"lag correlations must lie in [0, 1); offending entries {bad}"
                )
            ma_filter_weights(self.rho)  # realizability; raises SpecError if not
        elif self.kind == "moving-average":
            if self.kappa < 1:
                raise SpecError("moving-average window length must be >= 1")

    def lag_correlation(self, m: int) -> float:
        """Model correlation between tests m apart (0 beyond kappa)."""
        m = abs(int(m))
        if m == 0:
            return 1.0
        if self.kind == "gaussian-kdep" and m <= self.kappa:
            return self.rho[m - 1]
        if self.kind == "moving-average" and m < self.kappa:
            return (self.kappa - m) / self.kappa
        return 0.0

    @property
    def rho_max(self) -> float:
        """Maximal pairwise correlation over distinct tests."""
        if self.kind == "gaussian-kdep":
            return max(self.rho)
        if self.kind == "moving-average":
            return (self.kappa - 1) / self.kappa
        return 0.0


def _verify_weights(w: np.ndarray, r: np.ndarray, tol: float) -> np.ndarray:
    kappa = r.shape[0]
    w = w / math.sqrt(float(np.dot(w, w)))
    implied = np.array(
        [float(np.dot(w[: kappa + 1 - m], w[m:])) for m in range(1, kappa + 1)]
    )
    if float(np.max(np.abs(implied - r))) > tol:
        raise SpecError(
            "filter weight solve failed verification; implied lag "
            f"correlations {implied} vs requested {r}"
        )
    w.setflags(write=False)
    return w


def _bauer_weights(r: np.ndarray) -> np.ndarray | None:
    """Stationary rows of the banded Toeplitz Cholesky factor, or None.

    Converges geometrically when the spectral density stays away from
    zero; returns None (rather than raising) when it does not settle.
    """
    kappa = r.shape[0]
    size = max(256, 32 * kappa)
    while size <= (1 << 16):
        ab = np.zeros((kappa + 1, size))
        ab[0] = 1.0
        for m in range(1, kappa + 1):
            ab[m] = r[m - 1]
        try:
            chol = cholesky_banded(ab, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SpecError(
                f"correlation matrix is not positive definite: {exc}"
            ) from exc
        w = np.array([chol[k, size - 1 - k] for k in range(kappa + 1)])
        w_prev = np.array([chol[k, size - 2 - k] for k in range(kappa + 1)])
        if float(np.max(np.abs(w - w_prev))) < 1e-13:
            return w
        size *= 4
    return None


def _root_factor_weights(r: np.ndarray) -> np.ndarray:
    """Spectral factorization through the covariance polynomial roots.

    Handles boundary spectra (density touching zero): the roots of
    z^kappa * (1 + sum_m rho_m (z^m + z^-m)) come in (root, 1/root) pairs
    with even multiplicity on the unit circle; one conjugate-closed half
    is selected and expanded into the filter coefficients.
    """
    kappa = r.shape[0]
    coeffs = np.concatenate([r[::-1], [1.0], r])  # degree 2*kappa, palindromic
    roots = np.roots(coeffs[::-1])
    order = np.argsort(np.abs(roots))
    inside = [z for z in roots[order[:kappa]]]
    # Enforce conjugate closure (unit-circle ties can split pairs).
    selected: list[complex] = []
    pool = list(roots[order])
    while len(selected) < kappa and pool:
        z = pool.pop(0)
        selected.append(z)
        if abs(z.imag) > 1e-9:
            match = min(
                range(len(pool)),
                key=lambda j: abs(pool[j] - z.conjugate()),
                default=None,
            )
            if match is not None and len(selected) < kappa:
                selected.append(pool.pop(match))
    if len(selected) != kappa:
        selected = inside
    w = np.real(np.poly(selected)[::-1])
    return np.ascontiguousarray(w, dtype=float)


@lru_cache(maxsize=128)
def ma_filter_weights(rho: tuple[float, ...]) -> np.ndarray:
    """Filter weights hitting the requested lag correlations exactly.

    Solves for w_0..w_kappa with sum_k w_k w_{k+m} = rho_m (rho_0 = 1)
    from the banded Toeplitz correlation equations: the Cholesky rows
    converge to the stationary weights for interior spectra, and a root
    factorization covers spectra touching zero.  Correlation vectors with
    a negative spectral density are not realizable and are rejected.
    """
    kappa = len(rho)
    if kappa == 0:
        return np.ones(1)
    r = np.asarray(rho, dtype=float)
    if np.any((r < 0.0) | (r >= 1.0)):
        raise SpecError(f"lag correlations must lie in [0, 1), got {rho}")
    omega = np.linspace(0.0, math.pi, 8192)
    density = 1.0 + 2.0 * sum(r[m] * np.cos((m + 1) * omega) for m in range(kappa))
    fmin = float(density.min())
    if fmin < -1e-9:
        raise SpecError(
            "lag correlations are not realizable as a kappa-dependent sequence "
            f"(spectral density minimum {fmin:.3e} below zero)"
        )
    if fmin > 1e-6:
        w = _bauer_weights(r)
        if w is not None:
            return _verify_weights(w, r, 1e-9)
    w = _root_factor_weights(r)
    return _verify_weights(w, r, 1e-6)


# ---------------------------------------------------------------------------
# Panel specification and generation
# ---------------------------------------------------------------------------


@dataclass
class PanelSpec:
    """Full generative description of one p-by-n panel.

    ``offsets`` is a sparse tuple of (row, value) pairs with 1-based row
    indices and nonnegative values (the default empty tuple is the global
    null).  ``sizes`` optionally records per-row group sizes n_i <= n;
    generation always fills the full width and studentization uses the
    first n_i entries.  ``weights`` (p-by-n) feed weighted studentization
    only and never alter generation.
    """

    p: int
    n: int
    model: DependenceModel
    law: InnovationLaw
    offsets: tuple[tuple[int, float], ...] = ()
    sizes: tuple[int, ...] | None = None
    weights: np.ndarray | None = None
    weights_file: str | None = None
    weight_constraints: WeightConstraints = field(default_factory=WeightConstraints)
    seed: int = 0
    replicate: int = 0

    def validate(self) -> None:
        if self.p < 1:
            raise SpecError(f"test count p must be >= 1, got {self.p!r}")
        if self.n < 1:
            raise SpecError(f"group size n must be >= 1, got {self.n!r}")
        self.law.validate()
        self.model.validate()
        if self.model.kind == "gaussian-kdep" and not self.law.is_gaussian:
            raise SpecError(
                "gaussian-kdep builds columns from standard-normal drivers; "
                f"innovation law {self.law.kind!r} is not compatible "
                "(use the moving-average model for non-Gaussian dependence)"
            )
        seen = set()
        for idx, d in self.offsets:
            if not 1 <= idx <= self.p:
                raise SpecError(f"offset row {idx} outside [1, {self.p}]")
            if idx in seen:
                raise SpecError(f"duplicate offset row {idx}")
            seen.add(idx)
            if d < 0.0:
                raise SpecError(f"offsets d_i must be >= 0, got {d!r} at row {idx}")
        if self.sizes is not None:
            if len(self.sizes) != self.p:
                raise SpecError("sizes must give one group size per row")
            bad = [i + 1 for i, ni in enumerate(self.sizes) if not 2 <= ni <= self.n]
            if bad:
                raise SpecError(
                    f"per-row sizes must lie in [2, n]; offending rows {bad[:20]}"
                )
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.p, self.n):
                raise SpecError(
                    f"weights shape {w.shape} does not match panel ({self.p}, {self.n})"
                )
            sizes = None if self.sizes is None else np.asarray(self.sizes)
            try:
                check_weights(w, self.weight_constraints, sizes)
            except ValueError as exc:
                raise SpecError(str(exc)) from exc
        if not 0 <= self.seed < 2 ** 64:
            raise SpecError("seed must be a 64-bit nonnegative integer")
        if self.replicate < 0:
            raise SpecError("replicate index must be >= 0")

    def offset_vector(self) -> np.ndarray:
        d = np.zeros(self.p)
        for idx, val in self.offsets:
            d[idx - 1] = val
        return d

    def nonnull_rows(self) -> np.ndarray:
        """1-based rows with a strictly positive offset (the true signals)."""
        return np.array(sorted(idx for idx, val in self.offsets if val > 0.0),
                        dtype=np.int64)

    def with_replicate(self, replicate: int) -> "PanelSpec":
        return replace(self, replicate=int(replicate))


@dataclass
class Panel:
    """One realized panel: the data matrix plus its generating spec."""

    spec: PanelSpec
    data: np.ndarray


def stream(seed: int, replicate: int = 0, lane: int = 0) -> np.random.Generator:
    """The splittable random stream for (seed, replicate[, lane]).

    Distinct replicates (or lanes within a replicate) get statistically
    independent streams; the mapping is deterministic and independent of
    which worker draws from it.
    """
    key = (int(replicate),) if lane == 0 else (int(replicate), int(lane))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _window_filter(eps: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """One-pass banded filter: out[i] = sum_j weights[j] * eps[i + j]."""
    win = sliding_window_view(eps, weights.shape[0], axis=0)
    return np.einsum("ijk,k->ij", win, weights)


def _ma_window_weights(kappa: int) -> np.ndarray:
    return np.full(kappa, 1.0 / math.sqrt(kappa))


def generate(spec: PanelSpec) -> Panel:
    """Generate the panel described by ``spec``.

    Deterministic given (spec, seed, replicate): one stream, fixed draw
    order (drivers first, row-major), offsets added last.
    """
    spec.validate()
    rng = stream(spec.seed, spec.replicate)
    p, n = spec.p, spec.n
    model = spec.model
    if model.kind == "iid":
        data = spec.law.sample(rng, (p, n))
    elif model.kind == "gaussian-kdep":
        w = ma_filter_weights(model.rho)
        eps = rng.standard_normal((p + model.kappa, n))
        data = _window_filter(eps, np.ascontiguousarray(w[::-1]))
    else:
        kappa = model.kappa
        eps = spec.law.sample(rng, (p + kappa - 1, n))
        data = _window_filter(eps, _ma_window_weights(kappa))
    for idx, d in spec.offsets:
        if d != 0.0:
            data[idx - 1] += d
    return Panel(spec=spec, data=data)


# ---------------------------------------------------------------------------
# Row-marginal samplers (for tail Monte Carlo)
# ---------------------------------------------------------------------------


def sample_rows(
    spec: PanelSpec, i: int, reps: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``reps`` independent copies of row ``i`` (1-based) as (reps, n).

    The marginal law of a single row is reproduced exactly: iid and
    moving-average rows replay their construction, and a gaussian-kdep row
    is standard normal by construction.
    """
    if not 1 <= i <= spec.p:
        raise SpecError(f"row {i} outside [1, {spec.p}]")
    n = spec.n
    model = spec.model
    if model.kind == "moving-average":
        kappa = model.kappa
        eps = spec.law.sample(rng, (reps, n, kappa))
        rows = eps.sum(axis=2) / math.sqrt(kappa)
    elif model.kind == "gaussian-kdep":
        rows = rng.standard_normal((reps, n))
    else:
        rows = spec.law.sample(rng, (reps, n))
    d = spec.offset_vector()[i - 1]
    if d != 0.0:
        rows += d
    return rows


def sample_row_pairs(
    spec: PanelSpec, i1: int, i2: int, reps: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``reps`` copies of the joint rows (i1, i2), each (reps, n).

    The joint law depends on the lag m = |i1 - i2| through the model:
    bivariate normal with the model's lag correlation for gaussian-kdep,
    overlapping innovation windows for moving-average, independence for
    iid or beyond lag kappa.
    """
    if i1 == i2:
        raise SpecError("pair rows must be distinct")
    for i in (i1, i2):
        if not 1 <= i <= spec.p:
            raise SpecError(f"row {i} outside [1, {spec.p}]")
    n = spec.n
    m = abs(i2 - i1)
    model = spec.model
    if model.kind == "gaussian-kdep":
        rho = model.lag_correlation(m)
        z1 = rng.standard_normal((reps, n))
        z2 = rng.standard_normal((reps, n))
        row1 = z1
        row2 = rho * z1 + math.sqrt(1.0 - rho * rho) * z2
    elif model.kind == "moving-average" and m < model.kappa:
        kappa = model.kappa
        eps = spec.law.sample(rng, (reps, n, kappa + m))
        scale = 1.0 / math.sqrt(kappa)
        row1 = eps[:, :, :kappa].sum(axis=2) * scale
        row2 = eps[:, :, m:].sum(axis=2) * scale
    else:
        row1 = sample_rows(spec, i1, reps, rng)
        row2 = sample_rows(spec, i2, reps, rng)
        d = spec.offset_vector()
        return row1, row2
    d = spec.offset_vector()
    if d[i1 - 1] != 0.0:
        row1 = row1 + d[i1 - 1]
    if d[i2 - 1] != 0.0:
        row2 = row2 + d[i2 - 1]
    return row1, row2


# ---------------------------------------------------------------------------
# Flat binary persistence
# ---------------------------------------------------------------------------

_MAGIC = b"XPNL"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")  # magic, version, p, n, seed


@dataclass(frozen=True)
class PanelFileHeader:
    """Header of the flat binary panel format (documented in the README)."""

    version: int
    p: int
    n: int
    seed: int


def write_panel(panel: Panel, path) -> None:
    """Persist a panel: 32-byte header then p*n little-endian float64.

    Layout (all little-endian): magic ``XPNL`` (4 bytes), version uint32,
    p uint64, n uint64, seed uint64, then the data matrix row-major.
    """
    data = np.ascontiguousarray(panel.data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, panel.spec.p, panel.spec.n,
                              panel.spec.seed))
        fh.write(data.tobytes())


def read_panel(path) -> tuple[np.ndarray, PanelFileHeader]:
    """Read a panel file, returning (data, header) with bit-exact payload."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated panel header")
        magic, version, p, n, seed = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = p * n * 8
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").reshape(p, n).copy()
    return data, PanelFileHeader(version=version, p=p, n=n, seed=seed)


# ---------------------------------------------------------------------------
# Flat text configuration
# ---------------------------------------------------------------------------


def panel_spec_to_config(spec: PanelSpec) -> str:
    """Serialize a spec to the flat text format (section ``[panel]``).

    In-memory weights have no flat representation; give the spec a
    ``weights_file`` (.npy) to make it serializable.
    """
    if spec.weights is not None and not spec.weights_file:
        raise ValueError(
            "in-memory weights cannot be serialized; store them as .npy and "
            "set weights_file on the spec"
        )
    cp = configparser.ConfigParser()
    sec = {
        "p": str(spec.p),
        "n": str(spec.n),
        "model": spec.model.kind,
        "law": spec.law.kind,
        "seed": str(spec.seed),
        "replicate": str(spec.replicate),
    }
    if spec.model.kind != "iid":
        sec["kappa"] = str(spec.model.kappa)
    if spec.model.kind == "gaussian-kdep":
        sec["rho"] = ", ".join(repr(r) for r in spec.model.rho)
    if spec.law.kind == "standardized-pareto":
        sec["pareto_exponent"] = repr(spec.law.tail_exponent)
    if spec.law.kind == "two-point-with-atom":
        sec["atom"] = repr(spec.law.atom)
    if spec.offsets:
        sec["offsets"] = ", ".join(f"{i}:{repr(d)}" for i, d in spec.offsets)
    if spec.sizes is not None:
        sec["sizes"] = ", ".join(str(s) for s in spec.sizes)
    if spec.weights_file:
        sec["weights_file"] = spec.weights_file
    cp["panel"] = sec
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _parse_offsets(text: str) -> tuple[tuple[int, float], ...]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        idx, _, val = token.partition(":")
        out.append((int(idx), float(val)))
    return tuple(out)


def panel_spec_from_config(source) -> PanelSpec:
    """Parse a spec from flat text (a string, or a path to a config file)."""
    cp = configparser.ConfigParser()
    text = str(source)
    if "\n" not in text and not text.lstrip().startswith("["):
        with open(source) as fh:
            text = fh.read()
    cp.read_string(text)
    if "panel" not in cp:
        raise SpecError("config has no [panel] section")
    sec = cp["panel"]
    known = {
        "p", "n", "model", "law", "kappa", "rho", "pareto_exponent", "atom",
        "offsets", "sizes", "weights_file", "seed", "replicate",
    }
    unknown = set(sec) - known
    if unknown:
        raise SpecError(f"unknown [panel] keys: {sorted(unknown)}")

    model_kind = sec.get("model", "iid")
    if model_kind == "iid":
        model = DependenceModel.iid()
    elif model_kind == "gaussian-kdep":
        rho = tuple(float(tok) for tok in sec.get("rho", "").split(",") if tok.strip())
        model = DependenceModel.gaussian_kdep(rho)
    elif model_kind == "moving-average":
        model = DependenceModel.moving_average(sec.getint("kappa"))
    else:
        raise SpecError(f"unknown dependence model {model_kind!r}")

    law_kind = sec.get("law", "standard-normal")
    if law_kind == "standard-normal":
        law = InnovationLaw.normal()
    elif law_kind == "standardized-pareto":
        law = InnovationLaw.pareto(sec.getfloat("pareto_exponent"))
    elif law_kind == "standardized-rademacher":
        law = InnovationLaw.rademacher()
    elif law_kind == "two-point-with-atom":
        law = InnovationLaw.two_point(sec.getfloat("atom"))
    else:
        raise SpecError(f"unknown innovation law {law_kind!r}")

    sizes = None
    if sec.get("sizes"):
        sizes = tuple(int(tok) for tok in sec["sizes"].split(",") if tok.strip())
    weights = None
    weights_file = sec.get("weights_file") or None
    if weights_file:
        weights = np.load(weights_file)

    spec = PanelSpec(
        p=sec.getint("p"),
        n=sec.getint("n"),
        model=model,
        law=law,
        offsets=_parse_offsets(sec.get("offsets", "")),
        sizes=sizes,
        weights=weights,
        weights_file=weights_file,
        seed=sec.getint("seed", 0),
        replicate=sec.getint("replicate", 0),
    )
    spec.validate()
    return spec
