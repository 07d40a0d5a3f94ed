"""Interchangeable QUBO minimisers.

Every sampler exposes ``minimize(qubo, seed=0) -> SampleSet``; the eigensolver
drivers depend on nothing else, so a bridge to remote hardware only has to
implement that one method (see ``to_request`` / ``from_response`` for the
wire format).
"""
from dataclasses import dataclass, replace

import numpy as np

from ..errors import TooLarge
from ..qubobox import Qubo
from . import kernels

MAX_EXHAUSTIVE_DIM = 26


@dataclass(frozen=True)
class SampleSet:
    bits: np.ndarray        # (k, dim) int8
    energies: np.ndarray    # (k,)
    occurrences: np.ndarray = None

    def __post_init__(self):
        bits = np.atleast_2d(np.asarray(self.bits, dtype=np.int8))
        energies = np.atleast_1d(np.asarray(self.energies, dtype=float))
        if bits.shape[0] != energies.shape[0]:
            raise ValueError("one energy per sample required")
        occ = self.occurrences
        occ = np.ones(len(energies), dtype=np.int64) if occ is None else np.asarray(occ, dtype=np.int64)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "occurrences", occ)

    @classmethod
    def from_bits(cls, qubo, bits):
        bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
        return cls(bits, qubo.energy(bits))

    @property
    def best(self):
        return int(np.argmin(self.energies))

    @property
    def best_bits(self):
        return self.bits[self.best]

    @property
    def best_energy(self):
        return float(self.energies[self.best])

    def __len__(self):
        return len(self.energies)

    def aggregated(self):
        """Collapse duplicate bitstrings, summing occurrences; sorted by energy."""
        uniq, inverse = np.unique(self.bits, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        occ = np.bincount(inverse, weights=self.occurrences, minlength=len(uniq)).astype(np.int64)
        en = np.empty(len(uniq))
        en[inverse] = self.energies
        order = np.argsort(en, kind="stable")
        return SampleSet(uniq[order], en[order], occ[order])


@dataclass(frozen=True)
class SaConfig:
    numreads: int = 100
    sweeps: int = 1000
    beta_min: float = 0.1
    beta_max: float = 10.0
    schedule: str = "geometric"
    seed: int = 0
    beta_range: str = "qmax"   # "qmax": ladder / |Q_max|; "auto": from flip energies

    def __post_init__(self):
        if self.numreads < 1:
            raise ValueError("numreads must be >= 1")
        if self.sweeps < 0:
            raise ValueError("sweeps must be >= 0")
        if not self.beta_max > self.beta_min > 0:
            raise ValueError("need beta_max > beta_min > 0")
        if self.schedule not in ("geometric", "linear"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.beta_range not in ("qmax", "auto"):
            raise ValueError(f"unknown beta_range {self.beta_range!r}")

    def betas(self, scale=1.0):
        """Inverse temperatures per sweep, divided by the QUBO energy scale."""
        if self.sweeps == 0:
            return np.zeros(0)
        if self.schedule == "geometric":
            ladder = np.geomspace(self.beta_min, self.beta_max, self.sweeps)
        else:
            ladder = np.linspace(self.beta_min, self.beta_max, self.sweeps)
        return ladder / (scale if scale > 0 else 1.0)

    def betas_for(self, qubo):
        """Ladder for one QUBO.

        ``auto`` maps ``[beta_min, beta_max]`` onto
        ``[log(2)/dE_max, log(100)/dE_min]`` (times ``beta_min/0.1`` and
        ``beta_max/10``), where dE_max bounds any single-flip energy change
        and dE_min is the smallest nonzero coefficient magnitude: hot enough
        to accept every move at the start, cold enough to freeze the finest
        gaps at the end.
        """
        if self.beta_range == "qmax":
            return self.betas(qubo.max_abs)
        c = np.abs(qubo.coeffs)
        if self.sweeps == 0 or not np.any(c):
            return self.betas(1.0)
        row = c.sum(axis=0) + c.sum(axis=1) - np.diag(c)
        hot = np.log(2.0) / row.max() * (self.beta_min / 0.1)
        cold = np.log(100.0) / c[c > 0].min() * (self.beta_max / 10.0)
        cold = max(cold, hot * (1 + 1e-12))
        if self.schedule == "geometric":
            return np.geomspace(hot, cold, self.sweeps)
        return np.linspace(hot, cold, self.sweeps)


@dataclass(frozen=True)
class IceConfig:
    sigma_eta: float = 0.0
    seed: int = 0
    per_read: bool = False
    pattern: str = "upper"   # "upper": every i<=j entry; "support": nonzeros only

    def __post_init__(self):
        if self.sigma_eta < 0:
            raise ValueError("sigma_eta must be non-negative")
        if self.pattern not in ("upper", "support"):
            raise ValueError(f"unknown ICE pattern {self.pattern!r}")


def _mix_seed(*parts):
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
               .generate_state(1, np.uint64)[0])


def exhaustive(qubo):
    """Exact minimiser; ties go to the lexicographically smallest string."""
    if qubo.dim > MAX_EXHAUSTIVE_DIM:
        raise TooLarge(f"exhaustive search limited to {MAX_EXHAUSTIVE_DIM} bits, got {qubo.dim}")
    bits = kernels.exhaustive_argmin(qubo.coeffs)
    return SampleSet.from_bits(qubo, bits)


def simulated_anneal(qubo, cfg, seed=None, read_start=0):
    """Best-of-``numreads`` single-flip Metropolis annealing.

    Read r is fully determined by (seed, r); ``read_start`` lets callers run
    reads in separate batches without changing results.
    """
    seed = cfg.seed if seed is None else seed
    betas = cfg.betas_for(qubo)
    bits = kernels.anneal(qubo.coeffs, betas, seed, read_start, cfg.numreads)
    return SampleSet.from_bits(qubo, bits)


def ice_perturbation(qubo, ice, rng):
    """Gaussian coefficient error ``eta * |Q_max|`` with ``eta ~ N(0, sigma)``."""
    n = qubo.dim
    iu = np.triu_indices(n)
    noise = np.zeros((n, n))
    noise[iu] = rng.normal(0.0, ice.sigma_eta, size=len(iu[0])) * qubo.max_abs
    if ice.pattern == "support":
        keep = (qubo.coeffs != 0.0) | np.eye(n, dtype=bool)
        noise = np.where(keep, noise, 0.0)
    return noise


def ice_wrap(inner, qubo, ice, seed=0):
    """Run ``inner`` on ``Q + dQ`` and report energies under the clean ``Q``.

    One fresh dQ per call (one per submitted QUBO). With ``ice.per_read`` and
    an annealing inner sampler, each read sees its own dQ instead.
    """
    if ice.sigma_eta == 0.0:
        return inner.minimize(qubo, seed=seed)
    rng = np.random.default_rng([ice.seed & 0xFFFFFFFFFFFFFFFF, seed & 0xFFFFFFFFFFFFFFFF])
    if ice.per_read and isinstance(inner, SimulatedAnnealingSampler):
        one = replace(inner.cfg, numreads=1)
        rows = []
        for r in range(inner.cfg.numreads):
            noisy = Qubo(qubo.coeffs + ice_perturbation(qubo, ice, rng), qubo.offset)
            rows.append(simulated_anneal(noisy, one, seed=seed, read_start=r).bits[0])
        return SampleSet.from_bits(qubo, np.array(rows))
    noisy = Qubo(qubo.coeffs + ice_perturbation(qubo, ice, rng), qubo.offset)
    found = inner.minimize(noisy, seed=seed)
    return SampleSet(found.bits, qubo.energy(found.bits), found.occurrences)


class ExhaustiveSampler:
    name = "exhaustive"

    def minimize(self, qubo, seed=0):
        return exhaustive(qubo)


class SimulatedAnnealingSampler:
    name = "simulated_annealing"

    def __init__(self, cfg=None):
        self.cfg = cfg or SaConfig()

    def minimize(self, qubo, seed=0):
        return simulated_anneal(qubo, self.cfg, seed=_mix_seed(self.cfg.seed, seed))


class IceSampler:
    """Wraps another sampler with integrated-control-error noise."""

    name = "ice"

    def __init__(self, inner, ice):
        self.inner = inner
        self.ice = ice

    def minimize(self, qubo, seed=0):
        return ice_wrap(self.inner, qubo, self.ice, seed=seed)


# --- remote bridge wire format ----------------------------------------------

def to_request(qubo, numreads, annealing_time_us=100.0):
    doc = qubo.to_dict()
    doc.update({"numreads": int(numreads), "annealing_time_us": float(annealing_time_us)})
    return doc


def from_response(doc, qubo):
    """Parse ``{samples: [{bits, energy, occurrences}]}``; energies are recomputed."""
    rows, occ = [], []
    for s in doc["samples"]:
        bits = s["bits"]
        if len(bits) != qubo.dim:
            raise ValueError(f"sample has {len(bits)} bits, QUBO has {qubo.dim}")
        rows.append([1 if ch == "1" else 0 for ch in bits])
        occ.append(int(s.get("occurrences", 1)))
    bits = np.array(rows, dtype=np.int8).reshape(len(rows), qubo.dim)
    return SampleSet(bits, qubo.energy(bits), np.array(occ))


def to_response(sampleset):
    agg = sampleset.aggregated()
    return {"samples": [
        {"bits": "".join(str(int(b)) for b in agg.bits[i]),
         "energy": float(agg.energies[i]),
         "occurrences": int(agg.occurrences[i])}
        for i in range(len(agg))]}


__all__ = [
    "SampleSet", "SaConfig", "IceConfig",
    "exhaustive", "simulated_anneal", "ice_wrap", "ice_perturbation",
    "ExhaustiveSampler", "SimulatedAnnealingSampler", "IceSampler",
    "to_request", "from_response", "to_response", "MAX_EXHAUSTIVE_DIM",
]
