"""Measurement strategies: construction, validation, persistence, certification.

Builders cover the measurement families compared by the workbench: a single
standard basis, the maximal set of mutually unbiased bases (MUB) in d = 4 and
d = 16, the full family of pair-coupling Gell-Mann bases (GMB) plus its 5- and
4-basis subsets, the symmetric IC POVM (SIC) in d = 4, and the 3d-2 element
rank-1 POVM (PSI). Externally supplied POVMs load from a JSON file format.
"""

from __future__ import annotations

import cmath
import enum
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import NumericalError, ValidationError
from .qcore import UnitaryMap, hermiticity_defect, rng_stream

__all__ = [
    "ICClass",
    "PovmSetting",
    "Povm",
    "MeasurementMap",
    "IcReport",
    "build_standard_basis",
    "build_mub",
    "build_gmb_full",
    "build_gmb_5",
    "build_gmb_4",
    "build_sic",
    "build_psi",
    "build_named",
    "POVM_NAMES",
    "certify_ic",
    "hermitian_to_real_vec",
    "load_povm",
    "measurement_map",
    "neumark_embed",
    "round_robin_matchings",
    "save_povm",
]

EFFECT_PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-8
ORTHOBASIS_TOL = 1e-8
RANK_SV_TOL = 1e-9


class ICClass(enum.Enum):
    """Informational-completeness class claimed for a POVM."""

    FULLY_IC = "fully-ic"
    R1S_IC = "r1s-ic"
    R1_IC = "r1-ic"
    UNKNOWN = "unknown"


def _is_orthobasis(effects: tuple[np.ndarray, ...], dim: int) -> bool:
    # d rank-1 orthogonal projectors summing to identity.
    if len(effects) != dim:
        return False
    for e in effects:
        if np.max(np.abs(e @ e - e)) > ORTHOBASIS_TOL:
            return False
        if abs(np.trace(e).real - 1.0) > ORTHOBASIS_TOL:
            return False
    return True


@dataclass(frozen=True)
class PovmSetting:
    """One complete measurement: labeled effects summing to the identity."""

    label: str
    effects: tuple[np.ndarray, ...]
    is_orthobasis: bool = field(default=False)

    def __post_init__(self):
        effs = tuple(np.ascontiguousarray(e, dtype=np.complex128) for e in self.effects)
        if not effs:
            raise ValidationError(f"setting {self.label!r} has no effects")
        for e in effs:
            e.setflags(write=False)
        object.__setattr__(self, "effects", effs)
        dim = effs[0].shape[0]
        object.__setattr__(self, "is_orthobasis", _is_orthobasis(effs, dim))

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def completeness_defect(self) -> float:
        dim = self.effects[0].shape[0]
        total = sum(self.effects)
        return float(np.max(np.abs(total - np.eye(dim))))


@dataclass(frozen=True)
class Povm:
    """Ordered collection of measurement settings in a common dimension."""

    dim: int
    settings: tuple[PovmSetting, ...]
    ic_class_claim: ICClass = ICClass.UNKNOWN
    name: str = ""

    def __post_init__(self):
        settings = tuple(self.settings)
        if not settings:
            raise ValidationError("POVM needs at least one setting")
        object.__setattr__(self, "settings", settings)
        self.validate()

    def validate(self) -> None:
        problems = []
        for s in self.settings:
            for e in s.effects:
                if e.shape != (self.dim, self.dim):
                    raise ValidationError(
                        f"setting {s.label!r}: effect shape {e.shape} does not match dim {self.dim}"
                    )
                defect = hermiticity_defect(e)
                if defect > 1e-10:
                    problems.append(f"setting {s.label!r}: effect not Hermitian (defect {defect:.3e})")
                    continue
                lo = float(np.linalg.eigvalsh(e)[0])
                if lo < -EFFECT_PSD_TOL:
                    problems.append(f"setting {s.label!r}: effect not PSD (min eigenvalue {lo:.3e})")
            defect = s.completeness_defect()
            if defect > COMPLETENESS_TOL:
                problems.append(f"setting {s.label!r}: effects do not sum to identity (residual {defect:.3e})")
        if problems:
            raise ValidationError("invalid POVM:\n  " + "\n  ".join(problems))

    @property
    def n_settings(self) -> int:
        return len(self.settings)

    @property
    def n_outcomes(self) -> int:
        return sum(s.n_outcomes for s in self.settings)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.settings)

    def all_effects(self) -> list[np.ndarray]:
        return [e for s in self.settings for e in s.effects]

    def subset(self, n_settings: int, name: str = "", claim: ICClass = ICClass.UNKNOWN) -> "Povm":
        """POVM made of the first n_settings settings, in construction order."""
        if not 1 <= n_settings <= len(self.settings):
            raise ValueError(f"n_settings must be in [1, {len(self.settings)}], got {n_settings}")
        return Povm(
            self.dim,
            self.settings[:n_settings],
            ic_class_claim=claim,
            name=name or f"{self.name}[:{n_settings}]",
        )


def _projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def _orthobasis_setting(label: str, vectors: np.ndarray) -> PovmSetting:
    # vectors: columns are the basis states.
    return PovmSetting(label, tuple(_projector(vectors[:, k]) for k in range(vectors.shape[1])))


def build_standard_basis(dim: int) -> Povm:
    """Single setting of the d standard-basis projectors |k><k|."""
    eye = np.eye(dim, dtype=np.complex128)
    return Povm(
        dim,
        (_orthobasis_setting("standard", eye),),
        ic_class_claim=ICClass.UNKNOWN,
        name=f"standard-d{dim}",
    )


# ---------------------------------------------------------------------------
# Mutually unbiased bases via the finite-field partition of the Pauli group.
# ---------------------------------------------------------------------------

# Primitive polynomials keyed by number of qubits: GF(4) uses x^2+x+1,
# GF(16) uses x^4+x+1 (bit i of the integer = coefficient of x^i).
_GF_POLY = {2: 0b111, 4: 0b10011}
_MUB_DIMS = {4: 2, 16: 4}


def _gf_mul(a: int, b: int, n: int) -> int:
    poly = _GF_POLY[n]
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> n) & 1:
            a ^= poly
    return r


def _gf_trace(a: int, n: int) -> int:
    acc = 0
    s = a
    for _ in range(n):
        acc ^= s
        s = _gf_mul(s, s, n)
    if acc not in (0, 1):
        raise AssertionError("field trace left GF(2)")
    return acc


def _weyl_pauli(a: int, b: int, n: int) -> np.ndarray:
    """Hermitian Pauli-type operator labeled by (a, b) in GF(2^n) x GF(2^n).

    Acts as |y> -> (-1)^tr(b y) |y xor a| times a phase i^tr(ab) that makes
    the operator Hermitian; y runs over field elements indexing basis states.
    """
    d = 1 << n
    cols = np.arange(d)
    signs = np.array([(-1.0) ** _gf_trace(_gf_mul(b, y, n), n) for y in range(d)])
    m = np.zeros((d, d), dtype=np.complex128)
    m[cols ^ a, cols] = signs
    if _gf_trace(_gf_mul(a, b, n), n):
        m *= 1j
    return m


def _joint_eigenbasis(ops: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Common eigenbasis of commuting Hermitian operators.

    Diagonalizes a random real combination; retries when the combination is
    spectrally degenerate (gap below 1e-6) and therefore does not split all
    joint eigenspaces.
    """
    for _ in range(64):
        coeffs = rng.standard_normal(len(ops))
        a = sum(c * op for c, op in zip(coeffs, ops))
        w, v = np.linalg.eigh(a)
        if np.min(np.diff(w)) > 1e-6:
            return v
    raise NumericalError("failed to split joint eigenspaces after 64 random combinations")


def build_mub(dim: int, seed: int = 0) -> Povm:
    """The d+1 mutually unbiased bases for d in {4, 16}.

    Nonidentity Pauli labels (a, b) are partitioned into d+1 commuting classes
    {(x, lam*x): x != 0} for lam in GF(d) plus {(0, x)}, with commutation given
    by the trace-form symplectic pairing; each class is diagonalized jointly.
    The class {(0, x)} comes first (its eigenbasis is the standard basis),
    then lam = 0, 1, ... in field order.
    """
    n = _MUB_DIMS.get(dim)
    if n is None:
        raise ValueError(f"MUB construction supports dimensions {sorted(_MUB_DIMS)}, got {dim}")
    rng = rng_stream(seed, 101, dim)
    classes: list[tuple[str, list[tuple[int, int]]]] = [("inf", [(0, x) for x in range(1, dim)])]
    for lam in range(dim):
        classes.append((str(lam), [(x, _gf_mul(lam, x, n)) for x in range(1, dim)]))
    settings = []
    for tag, labels in classes:
        ops = [_weyl_pauli(a, b, n) for a, b in labels]
        vectors = _joint_eigenbasis(ops, rng)
        settings.append(_orthobasis_setting(f"mub-{tag}", vectors))
    return Povm(dim, tuple(settings), ic_class_claim=ICClass.FULLY_IC, name=f"mub-d{dim}")


# ---------------------------------------------------------------------------
# Gell-Mann bases: pair-coupling orthonormal bases.
# ---------------------------------------------------------------------------


def round_robin_matchings(dim: int) -> list[list[tuple[int, int]]]:
    """Circle-method 1-factorization of K_dim: d-1 perfect matchings covering
    each unordered pair exactly once. Pairs are canonicalized (min, max) and
    sorted within each matching."""
    if dim % 2:
        raise ValueError(f"1-factorization needs even dimension, got {dim}")
    m1 = dim - 1
    matchings = []
    for r in range(m1):
        pairs = [(r, m1)]
        for k in range(1, dim // 2):
            i, j = (r + k) % m1, (r - k) % m1
            pairs.append((min(i, j), max(i, j)))
        matchings.append(sorted(pairs))
    return matchings


def _pair_basis_setting(dim: int, label: str, pairs: list[tuple[int, int]], imag: bool) -> PovmSetting:
    phase = 1j if imag else 1.0
    vectors = np.zeros((dim, dim), dtype=np.complex128)
    col = 0
    for j, k in pairs:
        for sign in (1.0, -1.0):
            vectors[j, col] = 1.0 / math.sqrt(2.0)
            vectors[k, col] = sign * phase / math.sqrt(2.0)
            col += 1
    return _orthobasis_setting(label, vectors)


def build_gmb_full(dim: int) -> Povm:
    """Standard basis plus an X-type and a Y-type pair basis per matching of
    the round-robin 1-factorization: 2d-1 settings, 2d^2-d outcomes."""
    if dim % 2:
        raise ValueError(f"GMB construction needs even dimension, got {dim}")
    settings = [_orthobasis_setting("gmb-z", np.eye(dim, dtype=np.complex128))]
    for r, pairs in enumerate(round_robin_matchings(dim)):
        settings.append(_pair_basis_setting(dim, f"gmb-m{r}x", pairs, imag=False))
        settings.append(_pair_basis_setting(dim, f"gmb-m{r}y", pairs, imag=True))
    return Povm(dim, tuple(settings), ic_class_claim=ICClass.FULLY_IC, name=f"gmb-d{dim}")


def _ring_pairs(dim: int, odd: bool) -> list[tuple[int, int]]:
    if odd:
        return [(2 * k + 1, (2 * k + 2) % dim) for k in range(dim // 2)]
    return [(2 * k, 2 * k + 1) for k in range(dim // 2)]


def build_gmb_5(dim: int) -> Povm:
    """Five-basis subset: standard basis plus the two ring pairings, each in
    X-type and Y-type versions."""
    if dim % 2:
        raise ValueError(f"GMB construction needs even dimension, got {dim}")
    settings = (
        _orthobasis_setting("gmb-z", np.eye(dim, dtype=np.complex128)),
        _pair_basis_setting(dim, "gmb-b1x", _ring_pairs(dim, odd=False), imag=False),
        _pair_basis_setting(dim, "gmb-b2x", _ring_pairs(dim, odd=True), imag=False),
        _pair_basis_setting(dim, "gmb-b1y", _ring_pairs(dim, odd=False), imag=True),
        _pair_basis_setting(dim, "gmb-b2y", _ring_pairs(dim, odd=True), imag=True),
    )
    return Povm(dim, settings, ic_class_claim=ICClass.R1S_IC, name=f"5gmb-d{dim}")


def build_gmb_4(dim: int) -> Povm:
    """Four-basis subset: the 5-basis family without the standard basis."""
    five = build_gmb_5(dim)
    return Povm(dim, five.settings[1:], ic_class_claim=ICClass.R1_IC, name=f"4gmb-d{dim}")


# ---------------------------------------------------------------------------
# SIC POVM in d = 4 via a numerically found Weyl-Heisenberg fiducial.
# ---------------------------------------------------------------------------


def _displacements(dim: int) -> list[np.ndarray]:
    shift = np.roll(np.eye(dim, dtype=np.complex128), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    out = []
    for j in range(dim):
        for k in range(dim):
            out.append(np.linalg.matrix_power(shift, j) @ np.linalg.matrix_power(clock, k))
    return out


def _sic_orbit(dim: int, fiducial: np.ndarray) -> list[np.ndarray]:
    return [d @ fiducial for d in _displacements(dim)]


def sic_pair_residual(dim: int, fiducial: np.ndarray) -> float:
    """Sum over vector pairs of (|overlap|^2 - 1/(d+1))^2 for the orbit."""
    vs = _sic_orbit(dim, fiducial)
    target = 1.0 / (dim + 1.0)
    total = 0.0
    for a in range(len(vs)):
        for b in range(a + 1, len(vs)):
            total += (abs(np.vdot(vs[a], vs[b])) ** 2 - target) ** 2
    return total


def _sic_objective(dim: int, displacements: list[np.ndarray]):
    # Equiangularity in terms of single displacements: the orbit overlaps
    # |<psi_a|psi_b>|^2 reduce to |<phi|D_c|phi>|^2 for the label difference c,
    # so it suffices to drive the 15 nonidentity displacement overlaps to
    # 1/(d+1). Analytic gradient in the unnormalized real parametrization.
    target = 1.0 / (dim + 1.0)
    nontrivial = displacements[1:]

    def fun_and_grad(z: np.ndarray):
        u = z[:dim] + 1j * z[dim:]
        r = np.linalg.norm(u)
        psi = u / r
        value = 0.0
        g_psi = np.zeros(dim, dtype=np.complex128)
        for dmat in nontrivial:
            dpsi = dmat @ psi
            ov = np.vdot(psi, dpsi)
            t = abs(ov) ** 2
            diff = t - target
            value += diff * diff
            g_psi += 2.0 * diff * (np.conj(ov) * dpsi + ov * (dmat.conj().T @ psi))
        g_u = (g_psi - psi * np.real(np.vdot(psi, g_psi))) / r
        grad = np.concatenate([2.0 * g_u.real, 2.0 * g_u.imag])
        return value, grad

    return fun_and_grad


def _sic_fiducial_search(dim: int, seed: int, restarts: int = 100) -> np.ndarray:
    rng = rng_stream(seed, 113, dim)
    displacements = _displacements(dim)
    fun_and_grad = _sic_objective(dim, displacements)
    best = None
    best_value = np.inf
    for _ in range(restarts):
        z0 = rng.standard_normal(2 * dim)
        res = minimize(
            fun_and_grad,
            z0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-30, "gtol": 1e-14},
        )
        u = res.x[:dim] + 1j * res.x[dim:]
        psi = u / np.linalg.norm(u)
        value = sic_pair_residual(dim, psi)
        if value < best_value:
            best_value = value
            best = psi
        if best_value < 1e-20:
            return best
    raise NumericalError(
        f"fiducial search failed after {restarts} restarts (best pair residual {best_value:.3e})"
    )


def build_sic(dim: int = 4, fiducial=None, seed: int = 0) -> Povm:
    """Symmetric IC POVM: the Weyl-Heisenberg orbit of a fiducial vector,
    effects (1/d)|psi_jk><psi_jk| with all pairwise overlaps^2 = 1/(d+1).

    The fiducial is found by multi-start minimization unless supplied as a
    vector or as a JSON file holding a list of [re, im] pairs.
    """
    if dim != 4:
        raise ValueError(f"SIC construction is provided for dimension 4 only, got {dim}")
    if fiducial is None:
        phi = _sic_fiducial_search(dim, seed)
    else:
        if isinstance(fiducial, (str, os.PathLike)):
            with open(fiducial, encoding="utf-8") as fh:
                pairs = json.load(fh)
            phi = np.array([complex(re, im) for re, im in pairs])
        else:
            phi = np.asarray(fiducial, dtype=np.complex128)
        if phi.shape != (dim,):
            raise ValidationError(f"fiducial must have {dim} components, got shape {phi.shape}")
        phi = phi / np.linalg.norm(phi)
    residual = sic_pair_residual(dim, phi)
    if residual > 1e-18:
        raise ValidationError(f"fiducial does not generate a SIC orbit (pair residual {residual:.3e})")
    effects = tuple(_projector(v) / dim for v in _sic_orbit(dim, phi))
    setting = PovmSetting("sic", effects)
    return Povm(dim, (setting,), ic_class_claim=ICClass.FULLY_IC, name=f"sic-d{dim}")


def build_psi(dim: int) -> Povm:
    """Rank-1 POVM with 3d-2 elements probing populations and first-row
    coherences: E_0 = (1/2)|0><0| and, for j = 1..d-1 and the three cube
    roots of unity w^m, E_{j,m} = (1/3)(sqrt(t)|0> + w^m |j>)(h.c.) with
    t = 1/(2(d-1)). Sums to the identity exactly; fails to see the phases of
    states with <0|psi> = 0."""
    if dim < 2:
        raise ValueError(f"need dimension >= 2, got {dim}")
    t = 1.0 / (2.0 * (dim - 1))
    omega = cmath.exp(2j * cmath.pi / 3.0)
    effects = []
    e0 = np.zeros((dim, dim), dtype=np.complex128)
    e0[0, 0] = 1.0 - t * (dim - 1)
    effects.append(e0)
    for j in range(1, dim):
        for m in range(3):
            v = np.zeros(dim, dtype=np.complex128)
            v[0] = math.sqrt(t)
            v[j] = omega**m
            effects.append(_projector(v) / 3.0)
    setting = PovmSetting("psi", tuple(effects))
    return Povm(dim, (setting,), ic_class_claim=ICClass.R1S_IC, name=f"psi-d{dim}")


def build_5mub(dim: int, seed: int = 0) -> Povm:
    """The first five mutually unbiased bases, in construction order."""
    return build_mub(dim, seed).subset(5, name=f"5mub-d{dim}", claim=ICClass.R1S_IC)


POVM_NAMES = ("standard", "mub", "gmb", "5gmb", "4gmb", "5mub", "sic", "psi")


def build_named(name: str, dim: int, seed: int = 0) -> Povm:
    """Build one of the named measurement strategies."""
    key = name.strip().lower()
    if key == "standard":
        return build_standard_basis(dim)
    if key == "mub":
        return build_mub(dim, seed)
    if key == "gmb":
        return build_gmb_full(dim)
    if key == "5gmb":
        return build_gmb_5(dim)
    if key == "4gmb":
        return build_gmb_4(dim)
    if key == "5mub":
        return build_5mub(dim, seed)
    if key == "sic":
        return build_sic(dim, seed=seed)
    if key == "psi":
        return build_psi(dim)
    raise ValueError(f"unknown POVM name {name!r}; known names: {', '.join(POVM_NAMES)}")


# ---------------------------------------------------------------------------
# Persistence.
# ---------------------------------------------------------------------------


def _complex_to_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _pairs_to_complex(rows, label: str) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"setting {label!r}: malformed effect matrix ({exc})") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"setting {label!r}: effect matrix is not square (shape {m.shape})")
    return m


def save_povm(povm: Povm, path) -> None:
    """Write a POVM to the JSON file format (complex entries as [re, im])."""
    doc = {
        "dim": povm.dim,
        "name": povm.name,
        "ic_class_claim": povm.ic_class_claim.value,
        "settings": [
            {"label": s.label, "effects": [_complex_to_pairs(e) for e in s.effects]}
            for s in povm.settings
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_povm(path) -> Povm:
    """Load and validate a POVM file; raises ValidationError with per-setting
    residuals when effects do not form complete measurements."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"not a valid POVM file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("POVM file must hold a JSON object")
    for key in ("dim", "settings"):
        if key not in doc:
            raise ValidationError(f"POVM file missing required field {key!r}")
    try:
        dim = int(doc["dim"])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid dim field: {doc['dim']!r}") from exc
    claim_text = doc.get("ic_class_claim", ICClass.UNKNOWN.value)
    try:
        claim = ICClass(claim_text)
    except ValueError as exc:
        raise ValidationError(f"unknown ic_class_claim {claim_text!r}") from exc
    if not isinstance(doc["settings"], list) or not doc["settings"]:
        raise ValidationError("POVM file needs a non-empty settings list")
    settings = []
    for i, entry in enumerate(doc["settings"]):
        if not isinstance(entry, dict) or "label" not in entry or "effects" not in entry:
            raise ValidationError(f"settings[{i}] must carry 'label' and 'effects'")
        label = str(entry["label"])
        effects = tuple(_pairs_to_complex(rows, label) for rows in entry["effects"])
        settings.append(PovmSetting(label, effects))
    return Povm(dim, tuple(settings), ic_class_claim=claim, name=str(doc.get("name", "")))


# ---------------------------------------------------------------------------
# Measurement map, Neumark extension, IC certification.
# ---------------------------------------------------------------------------


def hermitian_to_real_vec(m: np.ndarray) -> np.ndarray:
    """Isometric real parametrization of a Hermitian matrix: diagonal entries,
    then sqrt(2) * Re and sqrt(2) * Im of the upper triangle."""
    d = m.shape[0]
    iu, ju = np.triu_indices(d, k=1)
    upper = m[iu, ju]
    return np.concatenate([m.diagonal().real, math.sqrt(2.0) * upper.real, math.sqrt(2.0) * upper.imag])


@dataclass(frozen=True)
class MeasurementMap:
    """Linear map from (vectorized Hermitian) states to outcome probabilities."""

    matrix: np.ndarray
    kernel: np.ndarray

    @property
    def rank(self) -> int:
        return self.matrix.shape[1] - self.kernel.shape[1]

    @property
    def kernel_dim(self) -> int:
        return self.kernel.shape[1]


def measurement_map(povm: Povm) -> MeasurementMap:
    """Stacked real-vectorized effects plus an orthonormal basis of the null
    space; rank(matrix) + kernel_dim = d^2 by construction."""
    rows = np.stack([hermitian_to_real_vec(e) for e in povm.all_effects()])
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.count_nonzero(s > RANK_SV_TOL))
    kernel = np.ascontiguousarray(vt[rank:].T)
    return MeasurementMap(matrix=rows, kernel=kernel)


def neumark_embed(povm: Povm, big_dim: int) -> tuple[UnitaryMap, tuple[int, ...]]:
    """Dilate a single-setting rank-1 POVM in d' into an orthogonal measurement
    on dimension big_dim >= n_outcomes.

    Returns a unitary whose first d' columns hold the rows <v_mu| of the
    effect square-root vectors (zero-padded), plus the outcome -> sublevel
    assignment. Measuring the standard basis after this unitary and projecting
    onto the first-d' subspace reproduces each effect.
    """
    if povm.n_settings != 1:
        raise ValueError("Neumark embedding applies to single-setting POVMs")
    setting = povm.settings[0]
    n = setting.n_outcomes
    if n > big_dim:
        raise ValueError(f"need target dimension >= {n} outcomes, got {big_dim}")
    small = povm.dim
    vectors = []
    for e in setting.effects:
        w, v = np.linalg.eigh(e)
        if w[-1] <= 0 or np.any(w[:-1] > 1e-10 * max(w[-1], 1.0)):
            raise ValueError("effects must be rank-1 for the Neumark embedding")
        vectors.append(math.sqrt(w[-1]) * v[:, -1])
    block = np.zeros((big_dim, small), dtype=np.complex128)
    for mu, v in enumerate(vectors):
        block[mu, :] = v.conj()
    u_svd, _, _ = np.linalg.svd(block, full_matrices=True)
    unitary = np.hstack([block, u_svd[:, small:]])
    return UnitaryMap(big_dim, unitary), tuple(range(n))


def _born_vector(povm: Povm, rho: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [[float(np.einsum("ab,ba->", e, rho).real) for e in s.effects] for s in povm.settings]
    )


@dataclass(frozen=True)
class IcReport:
    """Diagnostics from certify_ic; sampled statistics, not proofs."""

    rank: int
    kernel_dim: int
    fully_ic: bool
    r1_distinguishability: dict
    strictness_evidence: dict | None

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "kernel_dim": self.kernel_dim,
            "fully_ic": self.fully_ic,
            "r1_distinguishability": self.r1_distinguishability,
            "strictness_evidence": self.strictness_evidence,
        }


def certify_ic(
    povm: Povm,
    seed: int = 0,
    n_pairs: int = 1000,
    n_states: int = 50,
    strictness: bool = True,
) -> IcReport:
    """Rank/kernel of the measurement map plus sampled IC diagnostics.

    Rank-1 distinguishability draws pure-state pairs (alternating independent
    Haar pairs and phase-scrambled twins, which a bare orthobasis cannot tell
    apart) and checks that probability vectors differ. Strictness evidence
    runs noiseless convex reconstruction on Haar states and reports the
    infidelity statistics.
    """
    from . import estimate  # deferred: estimate depends on this module
    from .qcore import fidelity_pure, haar_random_state
    from .simulate import ErrorModel, measure

    mm = measurement_map(povm)
    rng = rng_stream(seed, 127)
    gaps = np.empty(n_pairs)
    n_ok = 0
    for i in range(n_pairs):
        psi1 = haar_random_state(povm.dim, rng)
        if i % 2:
            psi2 = haar_random_state(povm.dim, rng)
        else:
            phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=povm.dim))
            phases[0] = 1.0
            psi2 = type(psi1)(povm.dim, psi1.amplitudes * phases)
        overlap = abs(np.vdot(psi1.amplitudes, psi2.amplitudes)) ** 2
        if overlap > 1.0 - 1e-12:
            gaps[i] = np.nan
            continue
        gap = float(
            np.max(np.abs(_born_vector(povm, psi1.density().matrix) - _born_vector(povm, psi2.density().matrix)))
        )
        gaps[i] = gap
        n_ok += gap > 1e-8
    valid = gaps[~np.isnan(gaps)]
    r1 = {
        "n_pairs": int(valid.size),
        "min_probability_gap": float(valid.min()),
        "fraction_distinguished": float(n_ok / valid.size),
        "passed": bool(n_ok == valid.size),
    }

    evidence = None
    if strictness:
        noiseless = ErrorModel.zero()
        deltas = np.empty(n_states)
        for j in range(n_states):
            psi = haar_random_state(povm.dim, rng)
            record = measure(psi.density(), povm, noiseless, rng)
            result = estimate.mle_estimate(record, povm)
            deltas[j] = 1.0 - fidelity_pure(psi, result.rho_hat)
        evidence = {
            "n_states": int(n_states),
            "mean_infidelity": float(deltas.mean()),
            "max_infidelity": float(deltas.max()),
            "fraction_below_1e-6": float(np.mean(deltas < 1e-6)),
        }

    return IcReport(
        rank=mm.rank,
        kernel_dim=mm.kernel_dim,
        fully_ic=mm.rank == povm.dim**2,
        r1_distinguishability=r1,
        strictness_evidence=evidence,
    )
