"""Experiment orchestration: state sweeps, infidelity tables, basis-count scans.

A run draws Haar-random test states (shared across the POVMs of a config),
prepares each imperfectly, measures it under per-setting systematic map
errors that are fixed for the whole run, reconstructs by constrained MLE, and
reports the infidelity of each reconstruction against the target state.
Randomness is addressed by (master_seed, stream, povm_index, state_index), so
results are bit-for-bit reproducible regardless of worker count.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .estimate import lsq_estimate, mle_estimate
from .povm import ICClass, Povm, POVM_NAMES, build_named, load_povm
from .qcore import PureState, fidelity_pure, haar_random_state, rng_stream
from .simulate import ErrorModel, draw_map_errors, measure, prepare_state

__all__ = [
    "AggregateRow",
    "ExperimentConfig",
    "FailureProbeReport",
    "SweepResult",
    "TrialResult",
    "failure_set_probe",
    "run_basis_sweep",
    "run_table",
]

log = logging.getLogger(__name__)

# Stream namespaces under the master seed.
_STREAM_STATES = 1
_STREAM_PREP = 2
_STREAM_MAP = 3
_STREAM_FREQ = 4

TRIALS_CSV_HEADER = "povm,ic_class,d,n_settings_used,state_index,infidelity,objective,converged,seed"
AGGREGATE_CSV_HEADER = "povm,ic_class,d,n_settings_used,mean_infidelity,std_infidelity,n_states,seed"


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one orchestrated run."""

    dim: int
    povms: tuple[str, ...]
    n_states: int = 20
    master_seed: int = 0
    error_model: ErrorModel = field(default_factory=ErrorModel)
    estimator: str = "mle"
    povm_seed: int = 0
    sweep_n_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "povms", tuple(self.povms))
        if self.dim < 2:
            raise ValidationError(f"dimension must be >= 2, got {self.dim}")
        if self.n_states < 1:
            raise ValidationError(f"n_states must be >= 1, got {self.n_states}")
        if not self.povms:
            raise ValidationError("config needs at least one POVM")
        if self.estimator not in ("mle", "lsq"):
            raise ValidationError(f"unknown estimator {self.estimator!r}")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "povms": list(self.povms),
            "n_states": self.n_states,
            "seed": self.master_seed,
            "error_model": self.error_model.to_dict(),
            "estimator": self.estimator,
            "povm_seed": self.povm_seed,
            "sweep_n_max": self.sweep_n_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"dim", "povms", "n_states", "seed", "error_model", "estimator", "povm_seed", "sweep_n_max"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        if "dim" not in d or "povms" not in d:
            raise ValidationError("config needs at least 'dim' and 'povms'")
        model = d.get("error_model")
        return cls(
            dim=int(d["dim"]),
            povms=tuple(d["povms"]),
            n_states=int(d.get("n_states", 20)),
            master_seed=int(d.get("seed", 0)),
            error_model=ErrorModel.from_dict(model) if model else ErrorModel(),
            estimator=d.get("estimator", "mle"),
            povm_seed=int(d.get("povm_seed", 0)),
            sweep_n_max=None if d.get("sweep_n_max") is None else int(d["sweep_n_max"]),
        )


@dataclass(frozen=True)
class TrialResult:
    """One (POVM, test state) reconstruction."""

    povm_id: str
    ic_class: ICClass
    dim: int
    n_settings_used: int
    state_index: int
    infidelity: float
    objective: float
    converged: bool
    seed: int

    def __post_init__(self):
        if math.isfinite(self.infidelity) and not -1e-9 <= self.infidelity <= 1.0 + 1e-12:
            raise ValueError(f"infidelity {self.infidelity} outside [0, 1]")


@dataclass(frozen=True)
class AggregateRow:
    povm_id: str
    ic_class: ICClass
    dim: int
    n_settings_used: int
    mean_infidelity: float
    std_infidelity: float
    n_states: int
    seed: int


@dataclass(frozen=True)
class SweepResult:
    """All trials of a run plus per-(POVM, settings-used) aggregates."""

    trials: tuple[TrialResult, ...]
    rows: tuple[AggregateRow, ...]

    def trials_csv(self) -> str:
        lines = [TRIALS_CSV_HEADER]
        for t in self.trials:
            lines.append(
                f"{t.povm_id},{t.ic_class.value},{t.dim},{t.n_settings_used},"
                f"{t.state_index},{t.infidelity!r},{t.objective!r},{t.converged},{t.seed}"
            )
        return "\n".join(lines) + "\n"

    def aggregate_csv(self) -> str:
        lines = [AGGREGATE_CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.povm_id},{r.ic_class.value},{r.dim},{r.n_settings_used},"
                f"{r.mean_infidelity!r},{r.std_infidelity!r},{r.n_states},{r.seed}"
            )
        return "\n".join(lines) + "\n"

    def curve_text(self) -> str:
        """Two-column plot data: settings used, mean infidelity."""
        return "".join(f"{r.n_settings_used} {r.mean_infidelity!r}\n" for r in self.rows)


def _resolve_povm(name: str, dim: int, seed: int) -> Povm:
    if name.lower() in POVM_NAMES:
        return build_named(name, dim, seed)
    if os.path.isfile(name):
        povm = load_povm(name)
        if povm.dim != dim:
            raise ValidationError(f"POVM file {name!r} has dimension {povm.dim}, config wants {dim}")
        return povm
    raise ValidationError(f"unknown POVM {name!r}: not a built-in name and not a file")


def _subset_claim(povm: Povm, n: int) -> ICClass:
    if n == povm.n_settings:
        return povm.ic_class_claim
    if n == 5:
        return ICClass.R1S_IC
    if n == 4 and povm.name.startswith("gmb"):
        return ICClass.R1_IC
    return ICClass.UNKNOWN


class _RunContext:
    """Per-process cache of built POVMs and their fixed map-error tables."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._povms: dict[int, Povm] = {}
        self._errors: dict[int, tuple] = {}
        self._subsets: dict[tuple[int, int], Povm] = {}
        self._estimate = mle_estimate if config.estimator == "mle" else lsq_estimate

    def povm(self, idx: int) -> Povm:
        if idx not in self._povms:
            self._povms[idx] = _resolve_povm(self.config.povms[idx], self.config.dim, self.config.povm_seed)
        return self._povms[idx]

    def map_errors(self, idx: int):
        if idx not in self._errors:
            rng = rng_stream(self.config.master_seed, _STREAM_MAP, idx)
            self._errors[idx] = draw_map_errors(self.povm(idx), self.config.error_model, rng)
        return self._errors[idx]

    def subset(self, idx: int, n: int) -> Povm:
        key = (idx, n)
        if key not in self._subsets:
            povm = self.povm(idx)
            if n == povm.n_settings:
                self._subsets[key] = povm
            else:
                self._subsets[key] = povm.subset(n, name=povm.name, claim=_subset_claim(povm, n))
        return self._subsets[key]

    def test_state(self, state_idx: int) -> PureState:
        # Shared across POVMs: every strategy sees the same test set.
        return haar_random_state(self.config.dim, rng_stream(self.config.master_seed, _STREAM_STATES, state_idx))

    def run_trial(self, povm_idx: int, state_idx: int, settings_counts: tuple[int, ...]) -> tuple[TrialResult, ...]:
        cfg = self.config
        povm = self.povm(povm_idx)
        psi = self.test_state(state_idx)
        rho = prepare_state(psi, cfg.error_model, rng_stream(cfg.master_seed, _STREAM_PREP, povm_idx, state_idx))
        record = measure(
            rho,
            povm,
            cfg.error_model,
            rng_stream(cfg.master_seed, _STREAM_FREQ, povm_idx, state_idx),
            map_errors=self.map_errors(povm_idx),
            seed=cfg.master_seed,
        )
        out = []
        for n in settings_counts:
            sub_povm = self.subset(povm_idx, n)
            sub_record = record if n == povm.n_settings else record.truncated(n)
            try:
                est = self._estimate(sub_record, sub_povm)
                infid = 1.0 - fidelity_pure(psi, est.rho_hat)
                out.append(
                    TrialResult(
                        povm_id=povm.name,
                        ic_class=sub_povm.ic_class_claim,
                        dim=cfg.dim,
                        n_settings_used=n,
                        state_index=state_idx,
                        infidelity=infid,
                        objective=est.objective,
                        converged=est.converged,
                        seed=cfg.master_seed,
                    )
                )
            except Exception:  # noqa: BLE001 - flag the trial, do not drop the run
                log.warning(
                    "estimator failed for povm=%s state=%d settings=%d",
                    povm.name,
                    state_idx,
                    n,
                    exc_info=True,
                )
                out.append(
                    TrialResult(
                        povm_id=povm.name,
                        ic_class=sub_povm.ic_class_claim,
                        dim=cfg.dim,
                        n_settings_used=n,
                        state_index=state_idx,
                        infidelity=math.nan,
                        objective=math.nan,
                        converged=False,
                        seed=cfg.master_seed,
                    )
                )
        return tuple(out)


_WORKER_CTX: _RunContext | None = None


def _worker_init(config_dict: dict) -> None:
    global _WORKER_CTX
    _WORKER_CTX = _RunContext(ExperimentConfig.from_dict(config_dict))


def _worker_trial(task: tuple[int, int, tuple[int, ...]]) -> tuple[TrialResult, ...]:
    assert _WORKER_CTX is not None
    return _WORKER_CTX.run_trial(*task)


def _execute(config: ExperimentConfig, tasks: list[tuple[int, int, tuple[int, ...]]], jobs: int):
    if jobs <= 1:
        ctx = _RunContext(config)
        return [ctx.run_trial(*t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init, initargs=(config.to_dict(),)) as pool:
        return list(pool.map(_worker_trial, tasks, chunksize=chunk))


def _aggregate(config: ExperimentConfig, groups: list[list[TrialResult]]) -> SweepResult:
    trials = tuple(t for group in groups for t in group)
    rows = []
    seen = []
    for t in trials:
        key = (t.povm_id, t.n_settings_used)
        if key not in seen:
            seen.append(key)
    for povm_id, n_used in seen:
        group = [t for t in trials if (t.povm_id, t.n_settings_used) == (povm_id, n_used)]
        deltas = np.array([t.infidelity for t in group])
        std = float(np.std(deltas, ddof=1)) if deltas.size > 1 else 0.0
        rows.append(
            AggregateRow(
                povm_id=povm_id,
                ic_class=group[0].ic_class,
                dim=config.dim,
                n_settings_used=n_used,
                mean_infidelity=float(np.mean(deltas)),
                std_infidelity=std,
                n_states=len(group),
                seed=config.master_seed,
            )
        )
    return SweepResult(trials=trials, rows=tuple(rows))


def run_table(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Reconstruction-infidelity table: every configured POVM against the
    shared set of Haar test states, with per-run systematic errors."""
    ctx = _RunContext(config)
    tasks = []
    for povm_idx in range(len(config.povms)):
        n_full = ctx.povm(povm_idx).n_settings
        for state_idx in range(config.n_states):
            tasks.append((povm_idx, state_idx, (n_full,)))
    groups = _execute(config, tasks, jobs)
    return _aggregate(config, groups)


def run_basis_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Infidelity versus number of settings used, truncating a multi-setting
    orthobasis family to its first N settings in construction order.

    Each state is measured once with the full family; the N-setting trial
    reuses the leading part of that record, so N = full reproduces run_table.
    """
    if len(config.povms) != 1:
        raise ValidationError("basis sweep takes exactly one POVM family")
    ctx = _RunContext(config)
    povm = ctx.povm(0)
    if povm.n_settings < 2 or not all(s.is_orthobasis for s in povm.settings):
        raise ValidationError("basis sweep needs a multi-setting orthobasis POVM")
    n_max = config.sweep_n_max if config.sweep_n_max is not None else povm.n_settings
    if not 1 <= n_max <= povm.n_settings:
        raise ValidationError(f"sweep_n_max must be in [1, {povm.n_settings}], got {n_max}")
    counts = tuple(range(1, n_max + 1))
    tasks = [(0, state_idx, counts) for state_idx in range(config.n_states)]
    groups = _execute(config, tasks, jobs)
    # Order rows by N rather than by task order.
    result = _aggregate(config, groups)
    rows = tuple(sorted(result.rows, key=lambda r: r.n_settings_used))
    return SweepResult(trials=result.trials, rows=rows)


@dataclass(frozen=True)
class FailureProbeReport:
    """Noiseless reconstruction quality on generic versus failure-set states."""

    dim: int
    n_states: int
    seed: int
    generic_mean_infidelity: float
    failure_mean_infidelity: float

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_states": self.n_states,
            "seed": self.seed,
            "generic_mean_infidelity": self.generic_mean_infidelity,
            "failure_mean_infidelity": self.failure_mean_infidelity,
        }


def _zero_first_component_state(dim: int, rng: np.random.Generator) -> PureState:
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    z[0] = 0.0
    return PureState(dim, z / np.linalg.norm(z))


def failure_set_probe(dim: int = 4, n_states: int = 20, seed: int = 0) -> FailureProbeReport:
    """Noiseless tomography through the PSI POVM on generic Haar states and on
    states with <0|psi> = 0, whose first-row coherences the POVM cannot see."""
    from .povm import build_psi

    povm = build_psi(dim)
    model = ErrorModel.zero()

    def mean_delta(sampler, tag: int) -> float:
        deltas = []
        for j in range(n_states):
            rng = rng_stream(seed, _STREAM_STATES, tag, j)
            psi = sampler(dim, rng)
            record = measure(psi.density(), povm, model, rng)
            est = mle_estimate(record, povm)
            deltas.append(1.0 - fidelity_pure(psi, est.rho_hat))
        return float(np.mean(deltas))

    return FailureProbeReport(
        dim=dim,
        n_states=n_states,
        seed=seed,
        generic_mean_infidelity=mean_delta(haar_random_state, 0),
        failure_mean_infidelity=mean_delta(_zero_first_component_state, 1),
    )
