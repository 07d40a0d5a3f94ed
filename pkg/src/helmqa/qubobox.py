"""Binary encoding of bounded vectors and QUBO construction.

Each continuous component is written ``phi_j = phi_min_j + sum_k w_jk q_jk``
with ``w_jk = (phi_max_j - phi_min_j) 2^-k``. Note that with k starting at 0
the largest decodable value is ``phi_min + (2 - 2^(1-D)) * width``, i.e. the
encoding overshoots ``phi_max``; ``normalize=True`` rescales the weights so
the top code lands exactly on ``phi_max``.

Bit ``j*D + k`` of a QUBO vector is bit k of component j.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LengthMismatch


@dataclass(frozen=True)
class BinaryBox:
    phi_min: np.ndarray
    phi_max: np.ndarray
    D: int
    normalize: bool = False

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.phi_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.phi_max, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatch(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if not np.all(hi > lo):
            raise ValueError("phi_max must exceed phi_min componentwise")
        if self.D < 1:
            raise ValueError("need at least one bit per variable")
        object.__setattr__(self, "phi_min", lo)
        object.__setattr__(self, "phi_max", hi)

    @classmethod
    def symmetric(cls, n, D, half_width=1.0, normalize=False):
        return cls(-half_width * np.ones(n), half_width * np.ones(n), D, normalize)

    @classmethod
    def centered(cls, center, width, D, normalize=False):
        center = np.asarray(center, dtype=float)
        width = np.broadcast_to(np.asarray(width, dtype=float), center.shape)
        return cls(center - width / 2, center + width / 2, D, normalize)

    @property
    def n(self):
        return len(self.phi_min)

    @property
    def dim(self):
        return self.n * self.D

    @property
    def width(self):
        return self.phi_max - self.phi_min

    def bit_weights(self):
        """Per-component bit weights, shape ``(n, D)``."""
        w = self.width[:, None] * 2.0 ** -np.arange(self.D)[None, :]
        if self.normalize:
            w = w / (2.0 - 2.0 ** (1 - self.D))
        return w

    def encoding_matrix(self):
        """``W`` of shape ``(n, n*D)`` with ``decode(q) = phi_min + W q``."""
        w = self.bit_weights()
        mat = np.zeros((self.n, self.dim))
        for j in range(self.n):
            mat[j, j * self.D:(j + 1) * self.D] = w[j]
        return mat


def decode(box, q):
    """Continuous vector(s) for bitstring(s) ``q`` (last axis has n*D bits)."""
    q = np.asarray(q)
    if q.shape[-1] != box.dim:
        raise LengthMismatch(f"expected {box.dim} bits, got {q.shape[-1]}")
    bits = q.reshape(q.shape[:-1] + (box.n, box.D)).astype(float)
    return box.phi_min + np.einsum("...jk,jk->...j", bits, box.bit_weights())


@dataclass(frozen=True)
class Qubo:
    """``E(q) = q^T coeffs q + offset`` with upper-triangular ``coeffs``."""

    coeffs: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionMismatch(f"QUBO matrix must be square, got {c.shape}")
        if np.any(np.tril(c, -1) != 0.0):
            raise ValueError("QUBO coefficients must be upper triangular")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_symmetric(cls, sym, offset=0.0):
        """Fold a symmetric form ``q^T S q`` into upper-triangular storage."""
        sym = np.asarray(sym, dtype=float)
        up = 2.0 * np.triu(sym, 1)
        up[np.diag_indices_from(up)] = np.diag(sym)
        return cls(up, offset)

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros((dim, dim)), 0.0)

    @property
    def dim(self):
        return self.coeffs.shape[0]

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.coeffs))) if self.dim else 0.0

    def energy(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != self.dim:
            raise LengthMismatch(f"expected {self.dim} bits, got {q.shape[-1]}")
        return np.einsum("...i,ij,...j->...", q, self.coeffs, q) + self.offset

    def __add__(self, other):
        return Qubo(self.coeffs + other.coeffs, self.offset + other.offset)

    def __sub__(self, other):
        return Qubo(self.coeffs - other.coeffs, self.offset - other.offset)

    def scaled(self, c):
        return Qubo(c * self.coeffs, c * self.offset)

    def to_dict(self):
        i, j = np.nonzero(self.coeffs)
        entries = [[int(a), int(b), float(self.coeffs[a, b])] for a, b in zip(i, j)]
        return {"dim": self.dim, "entries": entries, "offset": self.offset}

    @classmethod
    def from_dict(cls, doc):
        dim = int(doc["dim"])
        c = np.zeros((dim, dim))
        for i, j, v in doc["entries"]:
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            c[i, j] += float(v)
        return cls(c, float(doc.get("offset", 0.0)))

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def quad_to_qubo(a, box):
    """QUBO whose energy equals ``phi^T a phi`` at every decoded point."""
    a = np.asarray(a, dtype=float)
    if a.shape != (box.n, box.n):
        raise DimensionMismatch(f"matrix {a.shape} does not match box of size {box.n}")
    sym = 0.5 * (a + a.T)
    w = box.encoding_matrix()
    quad = w.T @ sym @ w
    quad[np.diag_indices_from(quad)] += 2.0 * (w.T @ (sym @ box.phi_min))
    return Qubo.from_symmetric(quad, offset=float(box.phi_min @ a @ box.phi_min))


@dataclass(frozen=True)
class DeflationEntry:
    vector: np.ndarray
    value: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("deflation weight must be positive")


@dataclass(frozen=True)
class DeflationSet:
    entries: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def added(self, vector, value, beta):
        entry = DeflationEntry(np.asarray(vector, dtype=float), float(value), float(beta))
        return DeflationSet(self.entries + (entry,))

    def reweighted(self, lambda_upper):
        """Same vectors with ``beta_m = default_beta(lambda_upper, lambda_m)``."""
        return DeflationSet(tuple(DeflationEntry(e.vector, e.value, default_beta(lambda_upper, e.value))
                                  for e in self.entries))

    def penalty_matrix(self, m):
        """``sum_m beta_m (M phi_m)(M phi_m)^T`` as a dense matrix."""
        m = np.asarray(m, dtype=float)
        out = np.zeros_like(m)
        for e in self.entries:
            if e.vector.shape != (m.shape[0],):
                raise DimensionMismatch("deflation vector does not match M")
            u = m @ e.vector
            out += e.beta * np.outer(u, u)
        return out


def default_beta(lambda_upper, lambda_m):
    """Deflation weight guaranteeing beta > lam_n - lam_m inside the bracket."""
    return max(1.0, 2.0 * (lambda_upper - lambda_m))


def deflation_penalty(m, defl, box):
    if len(defl) == 0:
        return Qubo.zeros(box.dim)
    return quad_to_qubo(defl.penalty_matrix(m), box)


def gevp_parts(h, m, defl, box):
    """``(Q_base, Q_M)`` with ``Q(lam) = Q_base - lam * Q_M``.

    Q_base carries the H form plus the deflation penalty. Splitting lets the
    bisection rebuild Q(lam) with one axpy instead of re-encoding.
    """
    h = np.asarray(h, dtype=float)
    m = np.asarray(m, dtype=float)
    if h.shape != m.shape:
        raise DimensionMismatch(f"H {h.shape} and M {m.shape} differ")
    base = quad_to_qubo(h, box)
    if len(defl):
        base = base + deflation_penalty(m, defl, box)
    return base, quad_to_qubo(m, box)


def gevp_objective(h, m, lam, defl, box):
    """QUBO for ``phi^T H phi - lam phi^T M phi + xi(phi)`` over the box."""
    base, qm = gevp_parts(h, m, defl, box)
    return base - qm.scaled(lam)


def linear_to_qubo(c, box):
    """QUBO whose energy equals ``c^T phi`` at every decoded point."""
    c = np.asarray(c, dtype=float)
    if c.shape != (box.n,):
        raise DimensionMismatch(f"vector {c.shape} does not match box of size {box.n}")
    diag = box.encoding_matrix().T @ c
    return Qubo(np.diag(diag), offset=float(c @ box.phi_min))
