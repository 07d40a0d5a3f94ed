"""Annealing eigensolver drivers.

``qae_solve`` is the bisection on the Lagrange multiplier (one QUBO per
step), ``aqae_solve`` wraps it in the box algorithm, ``solve_modes`` adds
deflation to walk up the spectrum. The sampler is anything with
``minimize(qubo, seed) -> SampleSet``; with a classical annealer the same
driver is what the literature calls ACAE.
"""
import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import densela
from .errors import EmptyBracket, OrthogonalGroundState, ZeroVector
from .qubobox import (BinaryBox, DeflationSet, decode, default_beta, gevp_parts,
                      linear_to_qubo, quad_to_qubo)
from .samplers import _mix_seed

BRACKET_POLICIES = ("carry", "reset", "shrink")
STAR_CHOICES = ("witness", "final")
RESCALE_MODES = ("never", "deflated", "always")
TRACE_COLUMNS = ("iter", "lambda", "rel_residual", "eig_disc", "mode_disc", "box_width")


@dataclass(frozen=True)
class QaeConfig:
    """Bisection settings. ``None`` bounds are filled by ``default_bracket``."""

    n_lambda: int = 10
    lambda_min: float = None
    lambda_max: float = None

    def __post_init__(self):
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be >= 1")
        if self.lambda_min is not None and self.lambda_max is not None:
            if not self.lambda_min < self.lambda_max:
                raise EmptyBracket(f"empty bracket [{self.lambda_min}, {self.lambda_max}]")

    def bracket(self, gevp):
        if self.lambda_min is not None and self.lambda_max is not None:
            return float(self.lambda_min), float(self.lambda_max)
        lo, hi = default_bracket(gevp)
        lo = lo if self.lambda_min is None else float(self.lambda_min)
        hi = hi if self.lambda_max is None else float(self.lambda_max)
        if not lo < hi:
            raise EmptyBracket(f"empty bracket [{lo}, {hi}]")
        return lo, hi


@dataclass(frozen=True)
class AqaeConfig:
    """Box-algorithm settings.

    ``bracket`` chooses the lambda interval of each outer iteration:
    ``reset`` reuses the configured interval every time (the plain algorithm),
    ``carry`` keeps the lower bound and starts from the previous lambda*,
    ``shrink`` also narrows the width by ``ratio**2`` per iteration unless
    lambda* landed on the lower end.
    ``star`` picks the vector the next box is centred on: the decoded
    minimizer of the last solve (``final``) or of the last solve whose sign
    test came out negative (``witness``), which certifies lambda*.
    ``deflation_beta="bracket"`` recomputes each deflation weight from the
    upper end of the current bracket; ``"fixed"`` keeps the given weights.
    ``rescale`` divides the new centre by its largest magnitude before
    re-centring (eigenvectors carry no scale) while keeping the absolute
    width, which slows the relative contraction of the box; ``deflated``
    applies it only when a deflation set is active.
    """

    n_delta: int = 25
    ratio: float = 0.5
    D: int = 2
    box: BinaryBox = None
    qae: QaeConfig = field(default_factory=QaeConfig)
    bracket: str = "shrink"
    star: str = "witness"
    deflation_beta: str = "bracket"
    rescale: str = "deflated"

    def __post_init__(self):
        if self.n_delta < 1:
            raise ValueError("n_delta must be >= 1")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.bracket not in BRACKET_POLICIES:
            raise ValueError(f"bracket policy must be one of {BRACKET_POLICIES}")
        if self.star not in STAR_CHOICES:
            raise ValueError(f"star must be one of {STAR_CHOICES}")
        if self.rescale not in RESCALE_MODES:
            raise ValueError(f"rescale must be one of {RESCALE_MODES}")
        if self.deflation_beta not in ("bracket", "fixed"):
            raise ValueError("deflation_beta must be 'bracket' or 'fixed'")

    def initial_box(self, n):
        if self.box is not None:
            if self.box.n != n:
                raise ValueError(f"box has {self.box.n} variables, problem has {n}")
            return self.box
        return BinaryBox.symmetric(n, self.D)


def default_bracket(gevp):
    """Enclosing lambda interval for the ground state of ``gevp``.

    Homogeneous pencils have ``H >= 0`` and get ``[0, 2 max_i sum_j |H_ij| / M_ii]``.
    Normal-equation pencils get ``[-2 |b|^2 / lam_min(A), 0]``. Anything else
    falls back to a symmetric Gershgorin-type interval.
    """
    h, m = np.asarray(gevp.H), np.asarray(gevp.M)
    gersh = 2.0 * float(np.max(np.sum(np.abs(h), axis=1) / np.diag(m)))
    if gevp.kind == "homogeneous":
        return 0.0, gersh
    if gevp.kind == "normal":
        b = np.asarray(gevp.b)
        lam_a = densela.symmetric_eigen(m)[0][0]
        return -2.0 * float(b @ b) / lam_a, 0.0
    return -gersh, gersh


class QaeResult(NamedTuple):
    phi: np.ndarray          # decoded minimizer of the final solve
    lam: float               # lambda_max after n_lambda steps
    lambda_min: float
    lambda_max: float
    witness: np.ndarray      # minimizer of the last negative sign test, or None


def sign_value(h, m, phi, lam):
    return float(phi @ h @ phi - lam * (phi @ m @ phi))


def qae_solve(gevp, box, cfg, sampler, defl=None, seed=0, bracket=None):
    """Bisection on lambda over one fixed box.

    The sign test uses decoded vectors and the noiseless matrices; with a
    deflation set the penalised ``H`` is used, i.e. the same objective the
    QUBO encodes. ``bracket`` overrides ``cfg``'s interval.
    """
    defl = defl or DeflationSet()
    lo, hi = bracket if bracket is not None else cfg.bracket(gevp)
    if not lo < hi:
        raise EmptyBracket(f"empty bracket [{lo}, {hi}]")
    h = np.asarray(gevp.H, dtype=float)
    m = np.asarray(gevp.M, dtype=float)
    h_eff = h + defl.penalty_matrix(m) if len(defl) else h
    base, qm = gevp_parts(h, m, defl, box)
    phi, witness = None, None
    for step in range(cfg.n_lambda):
        lam = 0.5 * (lo + hi)
        found = sampler.minimize(base - qm.scaled(lam), seed=_mix_seed(seed, step))
        phi = decode(box, found.best_bits)
        if sign_value(h_eff, m, phi, lam) >= 0.0:
            lo = lam
        else:
            hi = lam
            witness = phi
    return QaeResult(phi, hi, lo, hi, witness)


class Metrics(NamedTuple):
    residual: float
    eig_disc: float
    mode_disc: float


def metrics(h, m, phi, lam, reference, r0=None):
    """Residual and discrepancies of ``(lam, phi)`` against a reference pair.

    ``phi`` is M-normalised and sign-aligned with the reference first. The
    residual is absolute unless ``r0`` is given, in which case it is divided
    by it.
    """
    phi = np.asarray(phi, dtype=float)
    norm2 = float(phi @ m @ phi)
    if not np.any(phi) or norm2 <= 0.0:
        raise ZeroVector("metrics undefined for a zero vector")
    hat = phi / math.sqrt(norm2)
    res = float(np.sum((h @ hat - lam * (m @ hat)) ** 2))
    if r0 is not None:
        res = res / r0 if r0 > 0 else (1.0 if res == 0 else math.inf)
    ref_val = float(reference.value)
    ref_vec = np.asarray(reference.vector, dtype=float)
    ref_vec = ref_vec / math.sqrt(float(ref_vec @ m @ ref_vec))
    if hat @ ref_vec < 0:
        hat = -hat
    eig = abs(lam - ref_val) / abs(ref_val) if ref_val != 0 else abs(lam)
    mode = float(np.linalg.norm(hat - ref_vec) / np.linalg.norm(ref_vec))
    return Metrics(res, eig, mode)


@dataclass
class SolveTrace:
    """One row per box iteration; undefined metrics are stored as NaN."""

    lam: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    rel_residual: list = field(default_factory=list)
    eig_disc: list = field(default_factory=list)
    mode_disc: list = field(default_factory=list)
    box_width: list = field(default_factory=list)
    box_center: list = field(default_factory=list)
    reference: densela.EigenPair = None
    flags: set = field(default_factory=set)

    def __len__(self):
        return len(self.lam)

    def append(self, lam, phi, box, h, m):
        try:
            raw = metrics(h, m, phi, lam, self.reference)
        except ZeroVector:
            raw = Metrics(math.nan, math.nan, math.nan)
        r0 = next((r for r in self.residual if not math.isnan(r)), None)
        if math.isnan(raw.residual):
            rel = math.nan
        elif r0 is None:
            rel = 1.0
        elif r0 > 0:
            rel = raw.residual / r0
        else:
            rel = 0.0 if raw.residual == 0 else math.inf
        self.lam.append(float(lam))
        self.phi.append(np.array(phi, dtype=float))
        self.residual.append(raw.residual)
        self.rel_residual.append(rel)
        self.eig_disc.append(raw.eig_disc)
        self.mode_disc.append(raw.mode_disc)
        self.box_width.append(float(np.max(box.width)))
        self.box_center.append(box.phi_min + 0.5 * box.width)

    @property
    def final_lambda(self):
        return self.lam[-1]

    @property
    def final_phi(self):
        return self.phi[-1]

    @property
    def final_residual(self):
        return self.rel_residual[-1]

    def orders_dropped(self):
        """``log10(R(0)/R(last))``; +inf for an exact final iterate."""
        last = self.final_residual
        if math.isnan(last):
            return math.nan
        return math.inf if last == 0 else -math.log10(last)

    def converged(self, threshold=1e-6):
        return bool(self.final_residual <= threshold)

    def rows(self):
        for i in range(len(self)):
            yield (i, self.lam[i], self.rel_residual[i], self.eig_disc[i],
                   self.mode_disc[i], self.box_width[i])

    def to_csv(self, path=None):
        """CSV text (floats at full precision); also written to ``path`` if given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def aqae_solve(gevp, cfg, sampler, defl=None, reference=None, seed=0):
    """Box-refined bisection; returns the per-iteration trace.

    ``reference`` defaults to the classical ground pair of the unpenalised
    pencil and only feeds the discrepancy columns.
    """
    h = np.asarray(gevp.H, dtype=float)
    m = np.asarray(gevp.M, dtype=float)
    if reference is None:
        reference = densela.generalized_eigen(h, m)[0]
    box = cfg.initial_box(gevp.dim)
    lo, hi = cfg.qae.bracket(gevp)
    width = hi - lo
    trace = SolveTrace(reference=reference)
    for i in range(cfg.n_delta):
        bracket = (hi - width, hi) if cfg.bracket == "shrink" else (lo, hi)
        step_defl = defl
        if defl is not None and len(defl) and cfg.deflation_beta == "bracket":
            step_defl = defl.reweighted(bracket[1])
        res = qae_solve(gevp, box, cfg.qae, sampler, step_defl, seed=_mix_seed(seed, i),
                        bracket=bracket)
        star = res.phi
        if cfg.star == "witness" and res.witness is not None:
            star = res.witness
        trace.append(res.lam, star, box, h, m)
        if cfg.bracket != "reset":
            # every test negative means lambda* sits on the floor; keep the
            # window so the next iteration can keep descending
            if res.lambda_min > bracket[0]:
                width *= cfg.ratio ** 2
            hi = res.lam
        center = star
        rescale = cfg.rescale == "always" or (cfg.rescale == "deflated" and defl is not None
                                               and len(defl) > 0)
        if rescale and np.any(star):
            center = star / np.max(np.abs(star))
        box = BinaryBox.centered(center, cfg.ratio * box.width, box.D, box.normalize)
    return trace


def solve_modes(gevp, n_modes, cfg, sampler, seed=0, references=None, known=()):
    """Lowest ``n_modes`` eigenpairs, each found with the previous ones deflated.

    Returns ``[(trace, EigenPair)]``; pairs are M-normalised. A mode whose
    eigenvalue is within 1e-8 (relative) of an earlier one gets
    ``"degenerate"`` in ``trace.flags``. ``sampler`` may also be a sequence
    holding one sampler per solved mode. ``known`` holds M-normalised pairs
    of the lowest modes found earlier; they are deflated and not re-solved.
    """
    known = list(known)
    if n_modes > gevp.dim:
        raise ValueError(f"asked for {n_modes} modes of a {gevp.dim}-dimensional pencil")
    if n_modes <= len(known):
        return []
    h = np.asarray(gevp.H, dtype=float)
    m = np.asarray(gevp.M, dtype=float)
    if references is None:
        references = densela.generalized_eigen(h, m)
    todo = n_modes - len(known)
    samplers = list(sampler) if isinstance(sampler, (list, tuple)) else [sampler] * todo
    if len(samplers) != todo:
        raise ValueError(f"need one sampler per mode, got {len(samplers)} for {todo}")
    upper = cfg.qae.bracket(gevp)[1]
    defl = DeflationSet()
    for pair in known:
        defl = defl.added(pair.vector, pair.value, default_beta(upper, pair.value))
    out = []
    for n in range(len(known), n_modes):
        trace = aqae_solve(gevp, cfg, samplers[n - len(known)], defl, references[n],
                           seed=_mix_seed(seed, n))
        phi = trace.final_phi
        norm2 = float(phi @ m @ phi)
        if norm2 <= 0:
            raise ZeroVector(f"mode {n} converged to the zero vector")
        pair = densela.EigenPair(trace.final_lambda, phi / math.sqrt(norm2))
        for prev in known + [q for _, q in out]:
            scale = max(abs(prev.value), abs(pair.value), 1e-300)
            if abs(prev.value - pair.value) < 1e-8 * scale:
                trace.flags.add("degenerate")
        out.append((trace, pair))
        defl = defl.added(pair.vector, pair.value, default_beta(upper, pair.value))
    return out


def recover_solution(lambda0, w0, b):
    """Linear-system solution from the normal-equation ground pair."""
    w0 = np.asarray(w0, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = float(b @ w0)
    if abs(denom) <= 1e-12 * np.linalg.norm(b) * np.linalg.norm(w0):
        raise OrthogonalGroundState("b^T w0 vanishes; ground state carries no solution")
    return -lambda0 * w0 / denom


@dataclass
class QpTrace:
    x: list = field(default_factory=list)
    width: list = field(default_factory=list)

    def errors(self, x_star, ord=2):
        return np.array([np.linalg.norm(xi - x_star, ord) for xi in self.x])


def box_minimize_qp(a, b, box, ratio, n_delta, sampler, seed=0):
    """Box algorithm on ``1/2 x^T A x - b^T x``; returns every iterate."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    trace = QpTrace()
    for i in range(n_delta):
        qubo = quad_to_qubo(0.5 * a, box) + linear_to_qubo(-b, box)
        x = decode(box, sampler.minimize(qubo, seed=_mix_seed(seed, i)).best_bits)
        trace.x.append(x)
        trace.width.append(float(np.max(box.width)))
        box = BinaryBox.centered(x, ratio * box.width, box.D, box.normalize)
    return trace
