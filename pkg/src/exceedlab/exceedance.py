"""Level exceedances: extraction, block/cluster structure, tail estimation.

An exceedance set records which rows of a studentized panel surpass a
level, in increasing index order.  The index axis can be tiled into
alternating large blocks (length ell) and small buffer blocks (length
kappa + 1), large block first; when the large-block length is derived
from a level s it follows ``ell = max(kappa + 2, ceil(exp(s^2 / 4)))``,
so that exceedances in distinct large blocks are independent and, at
admissible levels, each large block rarely holds more than one.

Monte Carlo tail estimators ship with hit-count guards and Wilson
intervals.  For Gaussian innovation laws the single and pair estimators
sample the exact sufficient statistics (sample mean plus chi-square /
Bartlett-decomposed scatter) instead of whole rows; this is plain Monte
Carlo of a statistic equal in law to the row construction and is
cross-checked against explicit row simulation in the test suite.

The coupling machinery estimates per-block hit probabilities for a
dependent panel and a matched independent panel (same marginal law,
common random numbers where the construction permits), forms the
count-match lower bound ``1 - sum_j |pi_j - pi'_j|`` and verifies it by
realizing the shared-uniform construction: draw U_j once, count
``N = #{U_j <= pi_j}`` and ``N' = #{U_j <= pi'_j}`` and measure
``P(N = N')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from exceedlab import panelgen as _pg
from exceedlab import studentize as _stu
from exceedlab.numerics import bivariate_normal_tail, student_t_sf

__all__ = [
    "BlockScheme",
    "ClusterStats",
    "CouplingEstimate",
    "ExceedanceSet",
    "InsufficientReplicates",
    "PairTailEstimate",
    "TailEstimate",
    "block_scheme",
    "cluster_stats",
    "count_match_lower_bound",
    "coupling_estimate",
    "extract",
    "simulate_count_match",
    "tail_probability_pair",
    "tail_probability_single",
    "wilson_interval",
]

_Z95 = 1.959963984540054


class InsufficientReplicates(ValueError):
    """A Monte Carlo guard tripped; ``required`` names the needed count."""

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


def wilson_interval(hits: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("interval needs a positive sample size")
    phat = hits / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return (lo, hi)


# ---------------------------------------------------------------------------
# Exceedance sets
# ---------------------------------------------------------------------------


@dataclass
class ExceedanceSet:
    """Rows whose statistic strictly exceeds ``level``; 1-based indices."""

    level: float
    indices: np.ndarray
    values: np.ndarray
    width: int

    def __len__(self) -> int:
        return self.indices.shape[0]


def extract(rows, level: float, width: int | None = None) -> ExceedanceSet:
    """Exact threshold pass over statistics (a StudentizedRows or an array).

    Rows at +inf exceed every finite level; rows pinned at the T = 1
    convention are included exactly when ``level < 1``.
    """
    if not math.isfinite(level):
        raise ValueError(f"level must be finite, got {level!r}")
    values = np.asarray(getattr(rows, "t", rows), dtype=float)
    if values.ndim != 1:
        raise ValueError("extract expects a 1-d statistic vector")
    p = values.shape[0] if width is None else int(width)
    if p < values.shape[0]:
        raise ValueError("width smaller than the statistic vector")
    mask = values > level
    idx = np.flatnonzero(mask).astype(np.int64) + 1
    return ExceedanceSet(level=float(level), indices=idx, values=values[mask],
                         width=p)


# ---------------------------------------------------------------------------
# Block schemes and cluster statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockScheme:
    """Alternating large/small tiling of [1, p], large block first.

    ``blocks`` lists (kind, start, end) with inclusive 1-based bounds and
    kind in {"large", "small", "fragment"}; a trailing partial block is
    the fragment.  ``m`` counts complete large blocks.
    """

    width: int
    kappa: int
    ell: int
    blocks: tuple[tuple[str, int, int], ...]

    @property
    def m(self) -> int:
        return sum(1 for kind, _, _ in self.blocks if kind == "large")

    def large_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        starts = [s for kind, s, _ in self.blocks if kind == "large"]
        ends = [e for kind, _, e in self.blocks if kind == "large"]
        return np.asarray(starts, dtype=np.int64), np.asarray(ends, dtype=np.int64)


def block_scheme(
    p: int, kappa: int, s: float | None = None, ell: int | None = None
) -> BlockScheme:
    """Tile [1, p] into large blocks and small buffers of length kappa + 1.

    The large-block length is ``ell`` when given, otherwise derived from
    the level: ``ell = max(kappa + 2, ceil(exp(s^2 / 4)))``, so large
    blocks always exceed the buffers.
    """
    if p < 1:
        raise ValueError(f"width p must be >= 1, got {p!r}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa!r}")
    if ell is None:
        if s is None or s <= 0.0:
            raise ValueError("need a positive level s (or an explicit ell)")
        grow = 0.25 * s * s
        raw = p if grow > math.log(max(p, 2)) + 2.0 else math.ceil(math.exp(grow))
        ell = max(kappa + 2, int(raw))
    ell = int(ell)
    if ell <= kappa + 1:
        raise ValueError("large blocks must be longer than small blocks")
    blocks: list[tuple[str, int, int]] = []
    pos = 1
    want_large = True
    while pos <= p:
        length = ell if want_large else kappa + 1
        end = pos + length - 1
        if end > p:
            blocks.append(("fragment", pos, p))
            break
        blocks.append(("large" if want_large else "small", pos, end))
        pos = end + 1
        want_large = not want_large
    return BlockScheme(width=p, kappa=kappa, ell=ell, blocks=tuple(blocks))


@dataclass
class ClusterStats:
    """Block-level exceedance counts for one replicate.

    ``small_block_exceedances`` includes hits in a trailing fragment
    shorter than kappa + 1 (such a stub is attached to the preceding
    buffer for counting); ``fragment_exceedances`` stays raw.  ``event_f``
    holds when no exceedance falls outside the large blocks and no large
    block holds more than one.  ``max_run_length`` is the longest run of
    consecutive exceedance indices (0 when empty), ``min_gap`` the
    smallest spacing between distinct exceedances (0 when fewer than two).
    """

    total: int
    large_blocks_hit: int
    large_blocks_multi: int
    small_block_exceedances: int
    fragment_exceedances: int
    max_run_length: int
    min_gap: int
    event_f: bool

    CSV_FIELDS = (
        "total", "large_blocks_hit", "large_blocks_multi",
        "small_block_exceedances", "fragment_exceedances",
        "max_run_length", "min_gap", "event_f",
    )

    def to_csv_row(self) -> list:
        return [
            self.total, self.large_blocks_hit, self.large_blocks_multi,
            self.small_block_exceedances, self.fragment_exceedances,
            self.max_run_length, self.min_gap, int(self.event_f),
        ]


def _counts_in(indices: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    lo = np.searchsorted(indices, starts, side="left")
    hi = np.searchsorted(indices, ends, side="right")
    return hi - lo


def cluster_stats(exc: ExceedanceSet, scheme: BlockScheme) -> ClusterStats:
    """Exact block-level counts of an exceedance set under a scheme."""
    if exc.width != scheme.width:
        raise ValueError(
            f"exceedance width {exc.width} does not match scheme {scheme.width}"
        )
    idx = exc.indices
    total = int(idx.shape[0])

    starts_l, ends_l = scheme.large_bounds()
    counts_l = _counts_in(idx, starts_l, ends_l) if starts_l.size else np.zeros(0, int)
    hit = int((counts_l >= 1).sum())
    multi = int((counts_l >= 2).sum())

    small_raw = 0
    frag_raw = 0
    frag_attached = 0
    for kind, start, end in scheme.blocks:
        if kind == "large":
            continue
        c = int(_counts_in(idx, np.array([start]), np.array([end]))[0])
        if kind == "small":
            small_raw += c
        else:
            frag_raw += c
            if end - start + 1 < scheme.kappa + 1:
                frag_attached += c

    if total >= 2:
        gaps = np.diff(idx)
        min_gap = int(gaps.min())
        run = 1
        max_run = 1
        for g in gaps:
            run = run + 1 if g == 1 else 1
            max_run = max(max_run, run)
    else:
        min_gap = 0
        max_run = total

    event_f = small_raw == 0 and frag_raw == 0 and multi == 0
    return ClusterStats(
        total=total,
        large_blocks_hit=hit,
        large_blocks_multi=multi,
        small_block_exceedances=small_raw + frag_attached,
        fragment_exceedances=frag_raw,
        max_run_length=int(max_run),
        min_gap=min_gap,
        event_f=event_f,
    )


# ---------------------------------------------------------------------------
# Tail probability estimation
# ---------------------------------------------------------------------------


@dataclass
class TailEstimate:
    """Monte Carlo estimate of P(R > s) with a Wilson 95% interval.

    ``exponent`` is the decay diagnostic -log(estimate) / (s^2 / 2), which
    approaches 1 from above for centered rows as n grows.
    """

    s: float
    estimate: float
    hits: int
    reps: int
    se: float
    wilson_low: float
    wilson_high: float
    exponent: float
    method: str


@dataclass
class PairTailEstimate:
    """Monte Carlo estimate of P(R_i1 > s, R_i2 > s) with interval.

    ``exponent`` is -log(estimate) / (s^2 / 2), to be compared against
    1 + alpha for within-range pairs.
    """

    s: float
    lag: int
    rho_lag: float
    estimate: float
    hits: int
    reps: int
    se: float
    wilson_low: float
    wilson_high: float
    exponent: float
    method: str


_CHUNK = 2_000_000


def _guard(reps: int, q_ref: float, min_hits: int, what: str) -> None:
    expected = reps * q_ref
    if expected < min_hits:
        required = 2 ** 62 if q_ref <= 0.0 else int(math.ceil(min_hits / q_ref))
        raise InsufficientReplicates(
            f"{what}: expected hits {expected:.2f} below the guard ({min_hits}); "
            f"need at least {required} replicates at this level",
            required=required,
        )


def _exponent(estimate: float, s: float) -> float:
    if s == 0.0:
        return math.nan
    if estimate <= 0.0:
        return math.inf
    return -math.log(estimate) / (0.5 * s * s)


def _single_guard_reference(spec: _pg.PanelSpec, s: float) -> float:
    n = spec.n
    if s == 0.0:
        return 0.5
    if s * s >= n:
        return 0.0
    t_level = _stu.r_level_to_t_level(s, n)
    return float(student_t_sf(t_level, n - 1))


def tail_probability_single(
    spec: _pg.PanelSpec,
    s: float,
    reps: int,
    i: int = 1,
    seed: int | None = None,
    method: str = "auto",
    min_expected_hits: int = 50,
    chunk: int = _CHUNK,
) -> TailEstimate:
    """Estimate P(R_i > s) for row ``i`` of panels drawn from ``spec``.

    Guards against starved estimates: the expected hit count under the
    Student t reference must reach ``min_expected_hits`` or the call is
    rejected naming the required replicate count.  ``method`` is
    ``"auto"`` (sufficiency sampling for Gaussian laws, explicit rows
    otherwise), ``"sufficiency"`` or ``"explicit"``.
    """
    spec.validate()
    if s < 0.0:
        raise ValueError(f"level s must be nonnegative, got {s!r}")
    _guard(reps, _single_guard_reference(spec, s), min_expected_hits,
           f"single tail at s={s:g}")
    if method == "auto":
        method = "sufficiency" if spec.law.is_gaussian else "explicit"
    if method == "sufficiency" and not spec.law.is_gaussian:
        raise ValueError("sufficiency sampling requires a Gaussian innovation law")

    rng = _pg.stream(spec.seed if seed is None else seed, 0, lane=1)
    n = spec.n
    d = spec.offset_vector()[i - 1]
    hits = 0
    done = 0
    while done < reps:
        c = min(chunk, reps - done)
        if method == "sufficiency":
            w = rng.standard_normal(c) * math.sqrt(n) + n * d
            cc = rng.chisquare(n - 1, c)
            r = w / np.sqrt(cc + w * w / n)
        else:
            rows = _pg.sample_rows(spec, i, c, rng)
            r = rows.sum(axis=1) / np.sqrt((rows * rows).sum(axis=1))
        hits += int((r > s).sum())
        done += c
    est = hits / reps
    lo, hi = wilson_interval(hits, reps)
    se = math.sqrt(max(est * (1.0 - est), 0.0) / reps)
    return TailEstimate(
        s=s, estimate=est, hits=hits, reps=reps, se=se,
        wilson_low=lo, wilson_high=hi, exponent=_exponent(est, s), method=method,
    )


def tail_probability_pair(
    spec: _pg.PanelSpec,
    i1: int,
    i2: int,
    s: float,
    reps: int,
    seed: int | None = None,
    method: str = "auto",
    min_expected_hits: int = 50,
    chunk: int = _CHUNK,
) -> PairTailEstimate:
    """Estimate P(R_i1 > s, R_i2 > s) for a row pair of ``spec`` panels.

    The joint law enters only through the lag |i1 - i2|.  The hit-count
    guard uses the bivariate normal tail at the model's lag correlation
    as its reference.  Methods as in :func:`tail_probability_single`;
    sufficiency sampling draws the exact joint sufficient statistics
    (mean vector and Bartlett-decomposed scatter) and needs n >= 3.
    """
    spec.validate()
    if s < 0.0:
        raise ValueError(f"level s must be nonnegative, got {s!r}")
    n = spec.n
    lag = abs(i2 - i1)
    rho = spec.model.lag_correlation(lag)
    q_ref = 0.0 if s * s >= n else bivariate_normal_tail(s, min(rho, 0.999))
    _guard(reps, q_ref, min_expected_hits, f"pair tail at s={s:g}")
    if method == "auto":
        method = "sufficiency" if (spec.law.is_gaussian and n >= 3) else "explicit"
    if method == "sufficiency":
        if not spec.law.is_gaussian:
            raise ValueError("sufficiency sampling requires a Gaussian innovation law")
        if n < 3:
            raise ValueError("pair sufficiency sampling needs n >= 3")

    rng = _pg.stream(spec.seed if seed is None else seed, 0, lane=2)
    d = spec.offset_vector()
    d1, d2 = d[i1 - 1], d[i2 - 1]
    sqrt_n = math.sqrt(n)
    rr = math.sqrt(max(1.0 - rho * rho, 0.0))
    hits = 0
    done = 0
    while done < reps:
        c = min(chunk, reps - done)
        if method == "sufficiency":
            g1 = rng.standard_normal(c)
            g2 = rng.standard_normal(c)
            m1 = d1 + g1 / sqrt_n
            m2 = d2 + (rho * g1 + rr * g2) / sqrt_n
            t11 = np.sqrt(rng.chisquare(n - 1, c))
            t21 = rng.standard_normal(c)
            t22sq = rng.chisquare(n - 2, c)
            s11 = t11 * t11
            b21 = rho * t11 + rr * t21
            s22 = b21 * b21 + rr * rr * t22sq
            r1 = n * m1 / np.sqrt(s11 + n * m1 * m1)
            r2 = n * m2 / np.sqrt(s22 + n * m2 * m2)
        else:
            rows1, rows2 = _pg.sample_row_pairs(spec, i1, i2, c, rng)
            r1 = rows1.sum(axis=1) / np.sqrt((rows1 * rows1).sum(axis=1))
            r2 = rows2.sum(axis=1) / np.sqrt((rows2 * rows2).sum(axis=1))
        hits += int(((r1 > s) & (r2 > s)).sum())
        done += c
    est = hits / reps
    lo, hi = wilson_interval(hits, reps)
    se = math.sqrt(max(est * (1.0 - est), 0.0) / reps)
    return PairTailEstimate(
        s=s, lag=lag, rho_lag=rho, estimate=est, hits=hits, reps=reps, se=se,
        wilson_low=lo, wilson_high=hi, exponent=_exponent(est, s), method=method,
    )


# ---------------------------------------------------------------------------
# Count-match coupling
# ---------------------------------------------------------------------------


def count_match_lower_bound(pi, pi_prime) -> float:
    """The coupling lower bound 1 - sum_j |pi_j - pi'_j| on P(N = N')."""
    pi = np.asarray(pi, dtype=float)
    pp = np.asarray(pi_prime, dtype=float)
    if pi.shape != pp.shape or pi.ndim != 1:
        raise ValueError("pi and pi_prime must be equal-length vectors")
    for name, v in (("pi", pi), ("pi_prime", pp)):
        if np.any((v < 0.0) | (v > 1.0)):
            raise ValueError(f"{name} entries must lie in [0, 1]")
    return 1.0 - float(np.abs(pi - pp).sum())


def simulate_count_match(
    pi,
    pi_prime,
    draws: int,
    rng: np.random.Generator,
    chunk: int = 500_000,
) -> tuple[float, float]:
    """Realize the shared-uniform coupling and measure P(N = N').

    Each draw shares one uniform vector U across both probability
    vectors: N counts U_j <= pi_j and N' counts U_j <= pi'_j.  Returns
    (match frequency, its standard error).
    """
    pi = np.asarray(pi, dtype=float)
    pp = np.asarray(pi_prime, dtype=float)
    if pi.shape != pp.shape or pi.ndim != 1:
        raise ValueError("pi and pi_prime must be equal-length vectors")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    m = pi.shape[0]
    matches = 0
    done = 0
    per = max(1, min(chunk // max(m, 1), draws))
    while done < draws:
        c = min(per, draws - done)
        u = rng.random((c, m))
        n_dep = (u <= pi).sum(axis=1)
        n_ind = (u <= pp).sum(axis=1)
        matches += int((n_dep == n_ind).sum())
        done += c
    freq = matches / draws
    se = math.sqrt(max(freq * (1.0 - freq), 0.0) / draws)
    return freq, se


@dataclass
class CouplingEstimate:
    """Per-block hit probabilities and the count-match bound.

    ``pi`` comes from dependent panels, ``pi_prime`` from matched
    independent panels (same marginal law, common random numbers where
    the construction shares them).  ``realized_match`` measures
    P(N = N') under the shared-uniform construction applied to the
    estimated vectors.
    """

    s: float
    pi: np.ndarray
    pi_prime: np.ndarray
    se_pi: np.ndarray
    se_pi_prime: np.ndarray
    lower_bound: float
    realized_match: float
    realized_se: float
    reps: int
    match_draws: int

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "exceedlab.coupling.v1",
            "s": self.s,
            "m": int(self.pi.shape[0]),
            "reps": self.reps,
            "match_draws": self.match_draws,
            "pi": [float(v) for v in self.pi],
            "pi_prime": [float(v) for v in self.pi_prime],
            "se_pi": [float(v) for v in self.se_pi],
            "se_pi_prime": [float(v) for v in self.se_pi_prime],
            "lower_bound": self.lower_bound,
            "realized_match": self.realized_match,
            "realized_se": self.realized_se,
        }


def _matched_r_values(
    spec: _pg.PanelSpec, replicate: int
) -> tuple[np.ndarray, np.ndarray]:
    """R vectors of one dependent panel and its matched independent panel.

    gaussian-kdep shares the driver array between arms (filtered vs
    identity weights); moving-average draws fresh per-row windows from
    the same stream; iid panels are their own independent counterpart.
    """
    spec = spec.with_replicate(replicate)
    model = spec.model
    p, n = spec.p, spec.n
    rng = _pg.stream(spec.seed, replicate)
    if model.kind == "gaussian-kdep":
        w = _pg.ma_filter_weights(model.rho)
        eps = rng.standard_normal((p + model.kappa, n))
        dep = _pg._window_filter(eps, np.ascontiguousarray(w[::-1]))
        ind = eps[:p].copy()
    elif model.kind == "moving-average":
        kappa = model.kappa
        eps = spec.law.sample(rng, (p + kappa - 1, n))
        dep = _pg._window_filter(eps, _pg._ma_window_weights(kappa))
        fresh = spec.law.sample(rng, (p, kappa, n))
        ind = fresh.sum(axis=1) / math.sqrt(kappa)
    else:
        dep = spec.law.sample(rng, (p, n))
        ind = dep
    d = spec.offset_vector()
    if d.any():
        dep = dep + d[:, None]
        ind = dep if ind is dep else ind + d[:, None]
    r_dep = _stu.studentize_panel(dep).r
    r_ind = r_dep if ind is dep else _stu.studentize_panel(ind).r
    return r_dep, r_ind


def coupling_estimate(
    spec: _pg.PanelSpec,
    scheme: BlockScheme,
    s: float,
    reps: int,
    se_cap: float = 0.02,
    match_draws: int = 100_000,
) -> CouplingEstimate:
    """Estimate the count-match coupling bound for ``spec`` at level ``s``.

    Simulates ``reps`` matched panel pairs, estimates the per-large-block
    any-hit probabilities pi_j (dependent) and pi'_j (independent),
    computes the lower bound 1 - sum |pi_j - pi'_j| and verifies it by
    the shared-uniform construction with ``match_draws`` draws.  The call
    is rejected unless ``reps`` caps every estimate's worst-case standard
    error at ``se_cap``.
    """
    spec.validate()
    if scheme.width != spec.p:
        raise ValueError("block scheme width must match the panel width")
    if s <= 0.0:
        raise ValueError(f"level s must be positive, got {s!r}")
    required = int(math.ceil(0.25 / (se_cap * se_cap)))
    if reps < required:
        raise InsufficientReplicates(
            f"coupling at se_cap={se_cap:g} needs at least {required} replicates, "
            f"got {reps}",
            required=required,
        )
    starts, ends = scheme.large_bounds()
    if starts.size == 0:
        raise ValueError("block scheme has no complete large block")
    m = starts.size
    hits_dep = np.zeros(m, dtype=np.int64)
    hits_ind = np.zeros(m, dtype=np.int64)
    for rep in range(reps):
        r_dep, r_ind = _matched_r_values(spec, rep)
        idx_dep = np.flatnonzero(r_dep > s) + 1
        idx_ind = np.flatnonzero(r_ind > s) + 1
        hits_dep += _counts_in(idx_dep, starts, ends) >= 1
        hits_ind += _counts_in(idx_ind, starts, ends) >= 1
    pi = hits_dep / reps
    pp = hits_ind / reps
    se_pi = np.sqrt(pi * (1.0 - pi) / reps)
    se_pp = np.sqrt(pp * (1.0 - pp) / reps)
    bound = count_match_lower_bound(pi, pp)
    rng = _pg.stream(spec.seed, reps, lane=3)
    freq, freq_se = simulate_count_match(pi, pp, match_draws, rng)
    return CouplingEstimate(
        s=s, pi=pi, pi_prime=pp, se_pi=se_pi, se_pi_prime=se_pp,
        lower_bound=bound, realized_match=freq, realized_se=freq_se,
        reps=reps, match_draws=match_draws,
    )
