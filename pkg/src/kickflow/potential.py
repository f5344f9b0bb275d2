"""Realizations of the stationary random kick potential.

A potential is a family F_k(x) of smooth random functions, independent across
integer times k and stationary in x.  Realizations are stored as analytic
coefficient sets (never grid samples), so spatial shifts and Galilean shears
are exact reindexings and the moving-frame identities checked elsewhere hold
to rounding error.

Generators
----------
zero                F_k(x) = 0
constant            F_k(x) = level
cosine-mixture      F_k(x) = sum_j a_j cos(w_j x + phi_j), smooth, cheap,
                    infinite dependence range
smoothed-shot-noise Poisson bumps b_i psi(2(x-c_i)/width) with
                    psi(u) = (1-u^2)^2 on |u| <= 1; C^1 with finite dependence
                    range equal to the bump support width

Per-slice coefficients are drawn from seed streams derived as
hash(master_seed, stream tag, slice index) via numpy's SeedSequence, which is
documented to be stable across platforms.  Identical spec and windows
reproduce bit-identical coefficients.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, WindowError

KINDS = ("zero", "constant", "cosine-mixture", "smoothed-shot-noise")

# stream tags keep coefficient draws, diagnostics, and future streams disjoint
_TAG_SLICE = 1
_TAG_MOMENT = 2

_TWO64 = 2 ** 64


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of one potential generator plus its master seed."""

    kind: str
    level: float = 0.0
    j_terms: int = 3
    amp_max: float = 1.0
    wavenumber_lo: float = 0.5
    wavenumber_hi: float = 2.5
    bump_rate: float = 1.0
    bump_width: float = 1.0
    bump_amp_lo: float = -1.0
    bump_amp_hi: float = 1.0
    master_seed: int = 0

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(kind="zero")

    @classmethod
    def constant(cls, level: float) -> "PotentialSpec":
        return cls(kind="constant", level=level)

    @classmethod
    def cosine_mixture(cls, j_terms=3, amp_max=1.0, wavenumber_lo=0.5,
                       wavenumber_hi=2.5, master_seed=0) -> "PotentialSpec":
        return cls(kind="cosine-mixture", j_terms=j_terms, amp_max=amp_max,
                   wavenumber_lo=wavenumber_lo, wavenumber_hi=wavenumber_hi,
                   master_seed=master_seed)

    @classmethod
    def shot_noise(cls, bump_rate=1.0, bump_width=1.0, bump_amp_lo=-1.0,
                   bump_amp_hi=1.0, master_seed=0) -> "PotentialSpec":
        return cls(kind="smoothed-shot-noise", bump_rate=bump_rate,
                   bump_width=bump_width, bump_amp_lo=bump_amp_lo,
                   bump_amp_hi=bump_amp_hi, master_seed=master_seed)

    @property
    def dependence_range(self) -> float:
        """Spatial decorrelation distance; bumps of finite width decorrelate exactly."""
        if self.kind == "smoothed-shot-noise":
            return self.bump_width
        if self.kind == "cosine-mixture":
            return math.inf
        return 0.0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"potential.kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "constant" and not math.isfinite(self.level):
            raise ConfigError(f"potential.level must be finite, got {self.level}")
        if self.kind == "cosine-mixture":
            if self.j_terms < 1:
                raise ConfigError(f"potential.j_terms must be >= 1, got {self.j_terms}")
            if not (math.isfinite(self.amp_max) and self.amp_max >= 0):
                raise ConfigError(f"potential.amp_max must be finite and nonnegative, got {self.amp_max}")
            if not (0 < self.wavenumber_lo <= self.wavenumber_hi):
                raise ConfigError(
                    "potential.wavenumber_lo/wavenumber_hi must satisfy 0 < lo <= hi, "
                    f"got [{self.wavenumber_lo}, {self.wavenumber_hi}]")
        if self.kind == "smoothed-shot-noise":
            if not (self.bump_width > 0):
                raise ConfigError(f"potential.bump_width must be positive, got {self.bump_width}")
            if not (math.isfinite(self.bump_rate) and self.bump_rate >= 0):
                raise ConfigError(f"potential.bump_rate must be finite and nonnegative, got {self.bump_rate}")
            if not (math.isfinite(self.bump_amp_lo) and math.isfinite(self.bump_amp_hi)
                    and self.bump_amp_lo <= self.bump_amp_hi):
                raise ConfigError(
                    "potential.bump_amp_lo/bump_amp_hi must be finite with lo <= hi, "
                    f"got [{self.bump_amp_lo}, {self.bump_amp_hi}]")
        if not isinstance(self.master_seed, int):
            raise ConfigError(f"potential.master_seed must be an integer, got {self.master_seed!r}")


def _slice_seed_key(spec: PotentialSpec, tag: int, k: int) -> tuple:
    return (spec.master_seed % _TWO64, tag, k % _TWO64)


def _slice_rng(spec: PotentialSpec, tag: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=_slice_seed_key(spec, tag, k)))


@dataclass(eq=False)
class SliceCoeffs:
    """Coefficients of one time slice; arrays are parallel."""

    k: int
    seed_key: tuple
    amps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    waves: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0))
    centers: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _draw_slice(spec: PotentialSpec, k: int, pad_lo: float, pad_hi: float,
                tag: int = _TAG_SLICE) -> SliceCoeffs:
    key = _slice_seed_key(spec, tag, k)
    if spec.kind in ("zero", "constant"):
        return SliceCoeffs(k=k, seed_key=key)
    rng = _slice_rng(spec, tag, k)
    if spec.kind == "cosine-mixture":
        amps = rng.uniform(0.0, spec.amp_max, spec.j_terms)
        waves = rng.uniform(spec.wavenumber_lo, spec.wavenumber_hi, spec.j_terms)
        phases = rng.uniform(0.0, 2.0 * math.pi, spec.j_terms)
        return SliceCoeffs(k=k, seed_key=key, amps=amps, waves=waves, phases=phases)
    # smoothed-shot-noise: Poisson centers over the padded window
    length = pad_hi - pad_lo
    count = int(rng.poisson(spec.bump_rate * length))
    centers = np.sort(rng.uniform(pad_lo, pad_hi, count))
    amps = rng.uniform(spec.bump_amp_lo, spec.bump_amp_hi, count)
    return SliceCoeffs(k=k, seed_key=key, amps=amps, centers=centers)


def _eval_coeffs(spec: PotentialSpec, coeffs: SliceCoeffs, x: np.ndarray) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros_like(x)
    if spec.kind == "constant":
        return np.full_like(x, spec.level)
    if spec.kind == "cosine-mixture":
        args = x[..., None] * coeffs.waves + coeffs.phases
        return np.cos(args) @ coeffs.amps
    out = np.zeros_like(x)
    half = spec.bump_width / 2.0
    # bumps are sorted by center, so only a contiguous run touches each x range
    lo = np.searchsorted(coeffs.centers, x.min() - half)
    hi = np.searchsorted(coeffs.centers, x.max() + half)
    for c, a in zip(coeffs.centers[lo:hi], coeffs.amps[lo:hi]):
        u = (x - c) / half
        mask = np.abs(u) < 1.0
        if mask.any():
            w = 1.0 - u[mask] ** 2
            out[mask] += a * w * w
    return out


@dataclass(eq=False)
class PotentialField:
    """One realization of the potential over a declared space-time window.

    Shift and shear transforms are stored as an affine reindexing
    (dn, dx, shear): eval(k, x) = base(k + dn, x + dx + shear*k).  The base
    coefficient records are shared, immutable, and seed-addressed, so
    transformed fields evaluate exactly and cheaply.
    """

    spec: PotentialSpec
    time_lo: int
    time_hi: int
    x_lo: float
    x_hi: float
    slices: dict
    dn: int = 0
    dx: float = 0.0
    shear_v: float = 0.0

    def _base_coords(self, k: int, x):
        return k + self.dn, x + self.dx + self.shear_v * k

    def eval(self, k: int, x):
        """Exact analytic evaluation of F_k at x (scalar or array)."""
        scalar = np.ndim(x) == 0
        bk, bx = self._base_coords(k, np.atleast_1d(np.asarray(x, dtype=float)))
        if bk < self.time_lo or bk > self.time_hi:
            raise WindowError(f"time index {k} maps outside generated window [{self.time_lo}, {self.time_hi}]")
        if bx.size and (bx.min() < self.x_lo - 1e-9 or bx.max() > self.x_hi + 1e-9):
            raise WindowError(
                f"evaluation at time {k} reaches x in [{bx.min():.6g}, {bx.max():.6g}], "
                f"outside generated window [{self.x_lo}, {self.x_hi}]")
        out = _eval_coeffs(self.spec, self.slices[bk], bx)
        return float(out[0]) if scalar else out

    def shift(self, dn: int, dx: float) -> "PotentialField":
        """Field with eval(k, x) = self.eval(k + dn, x + dx); coverage checked at eval."""
        return replace(self, dn=self.dn + dn, dx=self.dx + dx + self.shear_v * dn)

    def shear(self, v: float) -> "PotentialField":
        """Field with eval(k, x) = self.eval(k, x + v*k)."""
        return replace(self, shear_v=self.shear_v + v)

    def slice_bound(self, k: int) -> float:
        """Explicit bound on |F_k| over the window, computed from coefficients."""
        bk, _ = self._base_coords(k, np.asarray(0.0))
        if self.spec.kind == "zero":
            return 0.0
        if self.spec.kind == "constant":
            return abs(self.spec.level)
        return float(np.abs(self.slices[bk].amps).sum())

    def local_max(self, k: int, j: int) -> float:
        """max |F_k| over the unit cell [j, j+1], refined to 1e-9 stability."""
        pts = 257
        prev = None
        while True:
            xs = np.linspace(j, j + 1.0, pts)
            cur = float(np.abs(self.eval(k, xs)).max())
            if prev is not None and abs(cur - prev) < 1e-9:
                return cur
            if pts > 2_100_000:
                return cur
            prev = cur
            pts = 2 * pts - 1

    def to_json(self) -> str:
        """Coefficient dump enabling exact replay across runs and languages."""
        doc = {
            "spec": {k: getattr(self.spec, k) for k in (
                "kind", "level", "j_terms", "amp_max", "wavenumber_lo", "wavenumber_hi",
                "bump_rate", "bump_width", "bump_amp_lo", "bump_amp_hi", "master_seed")},
            "time_window": [self.time_lo, self.time_hi],
            "space_window": [self.x_lo, self.x_hi],
            "transform": {"dn": self.dn, "dx": self.dx, "shear_v": self.shear_v},
            "slices": [
                {
                    "k": c.k,
                    "seed_key": list(c.seed_key),
                    "amps": c.amps.tolist(),
                    "waves": c.waves.tolist(),
                    "phases": c.phases.tolist(),
                    "centers": c.centers.tolist(),
                }
                for _, c in sorted(self.slices.items())
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PotentialField":
        doc = json.loads(text)
        spec = PotentialSpec(**doc["spec"])
        slices = {}
        for s in doc["slices"]:
            slices[s["k"]] = SliceCoeffs(
                k=s["k"], seed_key=tuple(s["seed_key"]),
                amps=np.array(s["amps"], dtype=float),
                waves=np.array(s["waves"], dtype=float),
                phases=np.array(s["phases"], dtype=float),
                centers=np.array(s["centers"], dtype=float))
        t = doc["transform"]
        return cls(spec=spec, time_lo=doc["time_window"][0], time_hi=doc["time_window"][1],
                   x_lo=doc["space_window"][0], x_hi=doc["space_window"][1],
                   slices=slices, dn=t["dn"], dx=t["dx"], shear_v=t["shear_v"])


def sample_potential(spec: PotentialSpec, time_window, space_window) -> PotentialField:
    """Draw one realization over the requested windows.

    Coefficients of distinct time slices come from distinct derived seed
    streams.  For smoothed shot noise the space window is padded internally by
    the dependence range so that slices are statistically correct up to the
    declared edges.
    """
    spec.validate()
    m, n = int(time_window[0]), int(time_window[1])
    x_lo, x_hi = float(space_window[0]), float(space_window[1])
    if n < m:
        raise ConfigError(f"time_window [{m}, {n}] is empty")
    if not (x_hi > x_lo):
        raise ConfigError(f"space_window [{x_lo}, {x_hi}] is empty")
    pad = spec.bump_width if spec.kind == "smoothed-shot-noise" else 0.0
    slices = {k: _draw_slice(spec, k, x_lo - pad, x_hi + pad) for k in range(m, n + 1)}
    return PotentialField(spec=spec, time_lo=m, time_hi=n, x_lo=x_lo, x_hi=x_hi, slices=slices)


@dataclass(frozen=True)
class MomentEstimate:
    beta: float
    estimate: float
    stderr: float
    sample_count: int


def moment_diagnostic(field: PotentialField, beta: float, sample_count: int = 4096) -> MomentEstimate:
    """Monte Carlo estimate of E exp(-beta * F(0)) over independently resampled slices.

    Uses a seed stream disjoint from the field's own slices, so the diagnostic
    never perturbs reproducibility of the realization.
    """
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    spec = field.spec
    if beta == 0.0:
        return MomentEstimate(beta=0.0, estimate=1.0, stderr=0.0, sample_count=sample_count)
    if spec.kind == "zero":
        return MomentEstimate(beta=beta, estimate=1.0, stderr=0.0, sample_count=sample_count)
    if spec.kind == "constant":
        return MomentEstimate(beta=beta, estimate=math.exp(-beta * spec.level),
                              stderr=0.0, sample_count=sample_count)
    pad = spec.bump_width if spec.kind == "smoothed-shot-noise" else 0.0
    vals = np.empty(sample_count)
    x0 = np.asarray(0.0)
    for i in range(sample_count):
        coeffs = _draw_slice(spec, i, -1.0 - pad, 1.0 + pad, tag=_TAG_MOMENT)
        vals[i] = math.exp(-beta * float(_eval_coeffs(spec, coeffs, x0)))
    est = float(vals.mean())
    err = float(vals.std(ddof=1) / math.sqrt(sample_count)) if sample_count > 1 else 0.0
    return MomentEstimate(beta=beta, estimate=est, stderr=err, sample_count=sample_count)
