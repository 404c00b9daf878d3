"""Exhaustive correctness, security and mutual-information checks, and rate reconciliation.

Two enumeration routes share one result type:

``generic``
    Calls the scheme's :meth:`~qmacsec.protocols.Scheme.run` for every data
    point and every common-randomness value. Slow, but it exercises the real
    protocol code and serves as the oracle for the fast route.
``affine``
    Walks the :mod:`qmacsec.models` description with the compiled kernel (or
    its numpy fallback). Available for the sum and product schemes.

The server's view is the transcript of channel outputs. Distributions are exact
integer count vectors over the enumerated randomness; a scheme is secure iff all
data with the same ``F`` yield identical count vectors. For the product scheme
the view is a pair of independently randomised factors, and the joint view is
identical iff both factors are.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from qmacsec import kernels, models
from qmacsec.channel import ChannelSession, SimMode, ledger_rate
from qmacsec.protocols import QSKProd, Scheme

DEFAULT_LIMIT = 10**8
MAX_SERIALISED_ENTRIES = 4096


class LimitExceeded(RuntimeError):
    pass


def enumeration_limit(limit: int | None = None) -> int:
    if limit is not None:
        return int(limit)
    env = os.environ.get("QMAC_SECCOMP_LIMIT")
    return int(env) if env else DEFAULT_LIMIT


@dataclass
class FactorView:
    """Per-F transcript distributions of one view factor."""

    name: str
    denominator: int
    groups: dict[tuple, dict[tuple, int]] = field(default_factory=dict)
    digest: str = ""

    def finalise(self) -> None:
        canon = [[list(f), sorted([list(y), c] for y, c in dist.items())] for f, dist in sorted(self.groups.items())]
        self.digest = hashlib.sha256(json.dumps(canon).encode()).hexdigest()

    @property
    def entries(self) -> int:
        return sum(len(d) for d in self.groups.values())

    def to_dict(self, label=str) -> dict:
        out = {"name": self.name, "denominator": self.denominator, "digest": self.digest, "entries": self.entries}
        if self.entries <= MAX_SERIALISED_ENTRIES:
            out["distributions"] = [
                {
                    "F": [label(v) for v in f],
                    "support": [list(y) for y in sorted(dist)],
                    "counts": [dist[y] for y in sorted(dist)],
                }
                for f, dist in sorted(self.groups.items())
            ]
        return out


@dataclass
class Enumeration:
    """Everything one exhaustive pass learns about a scheme."""

    scheme: Scheme
    route: str
    backend: str | None
    data_points: int
    evaluations: int
    decode_failures: int = 0
    counterexample: dict | None = None
    views: list[FactorView] = field(default_factory=list)
    witness: dict | None = None
    cmi_nats: float | None = None
    cmi_exact_zero: bool | None = None
    cmi_is_lower_bound: bool = False
    seconds: float = 0.0


# -- generic route --------------------------------------------------------------


def _generic(scheme: Scheme, limit: int) -> Enumeration:
    size = scheme.data_size * scheme.randomness_size()
    if size > limit:
        raise LimitExceeded(f"{scheme.name} {scheme.params()}: {size} evaluations exceed limit {limit}")
    t0 = time.perf_counter()
    enum = Enumeration(scheme, "generic", None, scheme.data_size, size)
    rand = list(scheme.randomness_space())
    groups: dict[tuple, list[tuple[np.ndarray, Counter]]] = defaultdict(list)
    for W in scheme.data_space():
        truth = scheme.truth(W)
        hist: Counter = Counter()
        for cr in rand:
            run = scheme.run(W, cr)
            hist[run.transcript] += 1
            out = run.output
            if out != truth:
                enum.decode_failures += 1
                if enum.counterexample is None:
                    enum.counterexample = {
                        "data": W.tolist(),
                        "randomness": cr.to_dict(),
                        "expected": list(truth),
                        "decoded": list(out),
                    }
        groups[truth].append((W, hist))

    view = FactorView("transcript", len(rand))
    nats = 0.0
    exact = True
    for f, members in groups.items():
        ref_W, ref = members[0]
        view.groups[f] = dict(ref)
        total: Counter = Counter()
        for W, hist in members:
            total.update(hist)
            if enum.witness is None and hist != ref:
                enum.witness = {
                    "factor": "transcript",
                    "data": W.tolist(),
                    "reference_data": ref_W.tolist(),
                    "F": [scheme.output_label(v) for v in f],
                }
        nf = len(members)
        for _, hist in members:
            for y, c in hist.items():
                if c * nf != total[y]:
                    exact = False
                    nats += c * math.log(c * nf / total[y])
    enum.cmi_nats = 0.0 if exact else nats / (enum.data_points * len(rand))
    enum.cmi_exact_zero = exact
    view.finalise()
    enum.views = [view]
    enum.seconds = time.perf_counter() - t0
    return enum


# -- affine route -----------------------------------------------------------------


def _affine(scheme: Scheme, model: models.AffineModel, limit: int, backend: str | None, with_cmi: bool) -> Enumeration:
    if model.evaluations > limit:
        raise LimitExceeded(f"{scheme.name} {scheme.params()}: {model.evaluations} evaluations exceed limit {limit}")
    kern = kernels.get(backend)
    name = "cython" if kern is kernels.compiled_backend else "python"
    t0 = time.perf_counter()
    enum = Enumeration(scheme, "affine", name, scheme.data_size, model.evaluations)
    G = model.n_groups
    factor_state = []
    for factor in model.factors:
        S = factor.code_space
        ref = np.zeros((G, S), np.int64)
        ref_row = np.full(G, -1, np.int64)
        ref_total = np.zeros(G, np.int64)
        sums = np.zeros((G, S), np.int64)
        group_rows = np.zeros(G, np.int64)
        witness = np.full(4, -1, np.int64)
        denominators = set()
        for batch in factor.batches():
            denominators.add(batch.weight * batch.grid.shape[0])
            for ch in batch.chunks():
                before = witness[2]
                enum.decode_failures += kern.scan(
                    ch.base, batch.bz, factor.radix, ch.groups, ch.row_ids, batch.weight,
                    factor.dec, factor.dec_mod, factor.dec_mode, ch.targets,
                    ref, ref_row, ref_total, sums, group_rows, witness,
                )
                if before < 0 <= witness[2] and enum.counterexample is None:
                    W = model.row_data(int(witness[2]))
                    z = batch.grid[int(witness[3])]
                    enum.counterexample = {
                        "factor": factor.name,
                        "data": W.tolist(),
                        "randomness": dict(zip(batch.grid_names, z.tolist())),
                        "expected": [scheme.output_label(v) for v in scheme.truth(W)],
                    }
        if witness[0] >= 0 and enum.witness is None:
            W = model.row_data(int(witness[0]))
            enum.witness = {
                "factor": factor.name,
                "data": W.tolist(),
                "reference_data": model.row_data(int(witness[1])).tolist(),
                "F": [scheme.output_label(v) for v in scheme.truth(W)],
            }
        if len(denominators) != 1:
            raise AssertionError(f"factor {factor.name} has unequal randomness mass {denominators}")
        denom = denominators.pop()
        view = FactorView(factor.name, denom)
        for g in range(G):
            if ref_row[g] >= 0:
                nzc = np.nonzero(ref[g])[0]
                view.groups[model.group_label(g)] = {factor.decode_code(int(c)): int(ref[g, c]) for c in nzc}
        view.finalise()
        enum.views.append(view)
        factor_state.append((factor, sums, group_rows, denom))

    if model.final_check is not None:
        ok, cex = model.final_check()
        if not ok:
            enum.decode_failures += 1
            enum.counterexample = enum.counterexample or {"factor": "dlog-decode", **cex}

    if with_cmi:
        _affine_cmi(enum, model, factor_state, kern)
    enum.seconds = time.perf_counter() - t0
    return enum


def _affine_cmi(enum: Enumeration, model: models.AffineModel, factor_state, kern) -> None:
    per_factor = []
    for factor, sums, group_rows, denom in factor_state:
        acc, exact = 0.0, True
        for batch in factor.batches():
            for ch in batch.chunks():
                a, e = kern.kl(ch.base, batch.bz, factor.radix, ch.groups, batch.weight, sums, group_rows)
                acc += a
                exact = exact and e
        per_factor.append((0.0 if exact else acc / (enum.data_points * denom), exact))
    enum.cmi_exact_zero = all(e for _, e in per_factor)
    if enum.cmi_exact_zero:
        enum.cmi_nats = 0.0
    elif len(per_factor) == 1:
        enum.cmi_nats = per_factor[0][0]
    else:
        # joint information is at least that of any factor
        enum.cmi_nats = max(v for v, _ in per_factor)
        enum.cmi_is_lower_bound = True


def enumerate_scheme(scheme: Scheme, route: str = "auto", limit: int | None = None,
                     backend: str | None = None, with_cmi: bool = True) -> Enumeration:
    """One exhaustive pass over data x randomness.

    ``route`` is ``"generic"``, ``"affine"`` or ``"auto"`` (affine when the
    scheme has a model). Raises :class:`LimitExceeded` when the evaluation
    count is above ``limit`` (default: ``QMAC_SECCOMP_LIMIT`` or 1e8).
    """
    limit = enumeration_limit(limit)
    model = models.affine_model(scheme) if route in ("auto", "affine") else None
    if route == "affine" and model is None:
        raise ValueError(f"{scheme.name} has no affine model")
    if model is None:
        return _generic(scheme, limit)
    enum = _affine(scheme, model, limit, backend, with_cmi)
    if enum.cmi_is_lower_bound:
        try:
            exact = _generic(scheme, limit)
        except LimitExceeded:
            pass
        else:
            enum.cmi_nats, enum.cmi_is_lower_bound = exact.cmi_nats, False
    return enum


# -- reports ------------------------------------------------------------------------


@dataclass
class CorrectnessReport:
    protocol: str
    params: dict
    exhaustive: bool
    evaluations: int
    failures: int
    counterexample: dict | None
    route: str

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


@dataclass
class SecurityReport:
    protocol: str
    params: dict
    route: str
    factors: list[FactorView]
    witness: dict | None
    label: object = field(default=str, repr=False)

    @property
    def verdict(self) -> str:
        return "secure" if self.witness is None else "insecure"

    @property
    def secure(self) -> bool:
        return self.witness is None

    def conditional(self, factor: str | None = None) -> dict[tuple, dict[tuple, int]]:
        view = self.factors[0] if factor is None else next(v for v in self.factors if v.name == factor)
        return view.groups

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "params": self.params,
            "route": self.route,
            "verdict": self.verdict,
            "witness": self.witness,
            "factors": [v.to_dict(self.label) for v in self.factors],
        }


@dataclass
class MutualInformationReport:
    protocol: str
    params: dict
    dits: float
    exact_zero: bool
    lower_bound: bool
    route: str

    def to_dict(self) -> dict:
        return asdict(self)


def _as_enum(target, route, limit, backend) -> Enumeration:
    return target if isinstance(target, Enumeration) else enumerate_scheme(target, route, limit, backend)


def check_correctness_exhaustive(target, route="auto", limit=None, backend=None) -> CorrectnessReport:
    e = _as_enum(target, route, limit, backend)
    return CorrectnessReport(e.scheme.name, e.scheme.params(), True, e.evaluations, e.decode_failures, e.counterexample, e.route)


def check_correctness_sampled(scheme: Scheme, samples: int, seed: int = 0) -> CorrectnessReport:
    """Non-exhaustive fallback: random data and randomness through the real protocol."""
    rng = np.random.default_rng(seed)
    failures, cex = 0, None
    for _ in range(samples):
        W = scheme.sample_data(rng)
        cr = scheme.sample_randomness(rng)
        out, truth = scheme.run(W, cr).output, scheme.truth(W)
        if out != truth:
            failures += 1
            cex = cex or {"data": W.tolist(), "randomness": cr.to_dict(), "expected": list(truth), "decoded": list(out)}
    return CorrectnessReport(scheme.name, scheme.params(), False, samples, failures, cex, "sampled")


def check_security_exhaustive(target, route="auto", limit=None, backend=None) -> SecurityReport:
    e = _as_enum(target, route, limit, backend)
    return SecurityReport(e.scheme.name, e.scheme.params(), e.route, e.views, e.witness, e.scheme.output_label)


def conditional_mutual_information(target, route="auto", limit=None, backend=None) -> MutualInformationReport:
    """``I(W; Y | F)`` in base-d units (d the scheme's reference dimension), data uniform."""
    e = _as_enum(target, route, limit, backend)
    base = e.scheme.ref_dim
    return MutualInformationReport(
        e.scheme.name, e.scheme.params(), e.cmi_nats / math.log(base), bool(e.cmi_exact_zero), e.cmi_is_lower_bound, e.route
    )


# -- rates ------------------------------------------------------------------------------


@dataclass
class RateReport:
    protocol: str
    params: dict
    achieved: float
    symbolic: dict
    upper_bound: float
    lower_bound: float | None
    expected: float | None
    physical_qudits_per_computation: float
    physical_divergent: bool
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def _symbolic(ledger, L: int, d: int) -> dict:
    terms = sorted(ledger.entries.items())
    expr = " + ".join(f"{n}*log_{d}({dim})" if dim != d else f"{n}" for dim, n in terms)
    return {"numerator": L, "log_base": d, "terms": [[dim, n] for dim, n in terms], "expression": f"{L} / ({expr})"}


def physical_cost(scheme: Scheme, runs: int = 2, seed: int = 0) -> tuple[float, bool]:
    """Qudits (in reference-dimension units) consumed per computation by the quantum simulation."""
    rng = np.random.default_rng(seed)
    session = ChannelSession(SimMode.QUANTUM, pad=True)
    for _ in range(runs):
        scheme.run(scheme.sample_data(rng), scheme.sample_randomness(rng), session=session)
    session.close()
    return session.physical.dits(scheme.ref_dim) / (runs * scheme.L), session.divergent


def expected_rate(scheme: Scheme) -> float | None:
    """Closed-form rate of the scheme's construction, when there is one."""
    d, K = scheme.ref_dim, scheme.K
    if isinstance(scheme, QSKProd):
        dits = math.log(scheme.prime, d) + (math.log(d - 1, d) if d > 2 else 0.0)
        return (2 / K) / dits
    if scheme.name in ("qsk-sum", "broken-qsk-sum"):
        return 2 / K if K > 1 else 1.0
    return None


def reconcile_rate(target, tol: float = 1e-12) -> RateReport:
    """Compare achieved rate with 2/K (and the product lower bound).

    ``target`` is a :class:`Scheme` (paper accounting of one run) or a list of
    completed :class:`~qmacsec.protocols.ProtocolRun` objects of one scheme.
    """
    if isinstance(target, Scheme):
        scheme, ledger, L = target, target.paper_ledger(), target.L
    else:
        raise TypeError("pass a Scheme; use reconcile_runs for completed runs")
    return _rate_report(scheme, ledger, L, tol)


def reconcile_runs(scheme: Scheme, runs, tol: float = 1e-12) -> RateReport:
    ledger = runs[0].ledger
    for r in runs[1:]:
        ledger = ledger.merge(r.ledger)
    return _rate_report(scheme, ledger, sum(r.L for r in runs), tol)


def _rate_report(scheme, ledger, L, tol) -> RateReport:
    d, K = scheme.ref_dim, scheme.K
    achieved = ledger_rate(ledger, L, d)
    upper = 2 / K
    lower = scheme.lower_bound() if isinstance(scheme, QSKProd) else None
    expected = expected_rate(scheme)
    phys, divergent = physical_cost(scheme)
    ok = achieved <= upper + tol
    if lower is not None:
        ok = ok and achieved >= lower - tol
    if expected is not None:
        ok = ok and abs(achieved - expected) <= tol
    return RateReport(
        scheme.name, scheme.params(), achieved, _symbolic(ledger, L, d), upper, lower, expected, phys, divergent,
        "pass" if ok else "fail",
    )
