"""Command-line entry point: ``qmacsec {run,verify,sweep,list-protocols}``.

Exit codes: 0 ok, 2 invalid configuration, 3 internal error, 4 enumeration
limit exceeded, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from qmacsec import __version__, algebra, kernels, verify
from qmacsec.algebra import AlgebraError
from qmacsec.channel import ChannelError, ChannelSession, CostLedger, SimMode, UnpairedUseError, ledger_rate
from qmacsec.protocols import (
    SCHEMES,
    CommonRandomness,
    ProtocolError,
    QSKProd,
    QSKSum,
    Scheme,
    dot_product_demo,
    qs2_and_cited,
    qs2_and_new,
    qs2_and_new_bad_decode,
)

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL, EXIT_LIMIT, EXIT_VERIFY = 0, 2, 3, 4, 5

DESCRIPTIONS = {
    "qs2-and-cited": "two-user AND from one 2-sum over qubits (3-valued common randomness)",
    "qs2-and-new": "two-user AND from one additive use over Z_3",
    "qsk-sum": "K-user secure sum over Z_d",
    "qsk-prod": "K-user secure product over GF(p^r)",
    "qsk-and": "K-user AND (product over GF(2))",
    "dot-demo": "two-user inner product of 2-bit vectors over Z_11",
    "broken-qsk-sum": "negative control: sum with masks forced to zero",
    "broken-qs2-and-decode": "negative control: new QS2-AND with a corrupted decode map",
    "broken-qsk-prod": "negative control: product without masking of zero inputs",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    protocol: str
    d: int | None = None
    p: int | None = None
    r: int | None = None
    k: int | None = None
    instances: int | None = None
    mode: str = "abstract"
    seed: int = 0
    limit: int | None = None
    out: str | None = None

    def echo(self) -> dict:
        return {k: v for k, v in vars(self).items() if k not in ("out",) and v is not None}


# -- scheme construction ---------------------------------------------------------


def _field(cfg: RunConfig) -> tuple[int, int]:
    if cfg.p is not None:
        return cfg.p, cfg.r if cfg.r is not None else 1
    if cfg.d is None:
        raise ConfigError(f"{cfg.protocol} needs --p/--r or --d")
    spec = algebra.field_for_order(cfg.d)
    return spec.p, spec.r


def _need(cfg: RunConfig, *names: str) -> None:
    missing = [f"--{n}" for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"{cfg.protocol} needs {', '.join(missing)}")


def make_scheme(cfg: RunConfig) -> Scheme:
    name = cfg.protocol
    if name not in SCHEMES:
        raise ConfigError(f"unknown protocol {name!r}; see list-protocols")
    cls = SCHEMES[name]
    try:
        if issubclass(cls, QSKProd):
            _need(cfg, "k")
            if name == "qsk-and":
                return cls(cfg.k)
            return cls(*_field(cfg), cfg.k)
        if issubclass(cls, QSKSum):
            _need(cfg, "d", "k")
            return cls(cfg.d, cfg.k)
        return cls()
    except (ProtocolError, AlgebraError) as exc:
        raise ConfigError(str(exc)) from exc


# -- run -------------------------------------------------------------------------


def _bits(s: str | None, what: str) -> tuple[int, int]:
    if s is None or len(s) != 2 or set(s) - {"0", "1"}:
        raise ConfigError(f"{what} must be a 2-bit string such as 10, got {s!r}")
    return int(s[0]), int(s[1])


def _bit(s: str | None, what: str) -> int:
    if s not in ("0", "1"):
        raise ConfigError(f"{what} must be 0 or 1, got {s!r}")
    return int(s)


def _parse_data(text: str, K: int) -> np.ndarray:
    try:
        arr = np.array(json.loads(text), dtype=np.int64)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"--data must be a JSON K x N integer matrix: {exc}") from exc
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != K:
        raise ConfigError(f"--data must have {K} rows")
    return arr


def _runs_report(runs, L_total: int, ref_dim: int, session: ChannelSession) -> dict:
    ledger = CostLedger()
    for run in runs:
        ledger = ledger.merge(run.ledger)
    return {
        "runs": [r.to_dict() for r in runs],
        "instances": L_total,
        "ledger": ledger.to_dict(),
        "rate": verify._symbolic(ledger, L_total, ref_dim) | {"value": ledger_rate(ledger, L_total, ref_dim)},
        "physical_qudits": session.physical.to_dict(),
        "paper_rate_divergent": session.divergent,
    }


def cmd_run(cfg: RunConfig, args) -> tuple[dict, int]:
    mode = SimMode(cfg.mode)
    session = ChannelSession(mode, pad=args.pad)
    rng = np.random.default_rng(cfg.seed)
    name = cfg.protocol

    if name in ("qs2-and-cited", "qs2-and-new", "broken-qs2-and-decode"):
        a, b = _bit(args.a, "--a"), _bit(args.b, "--b")
        hi = 3 if name == "qs2-and-cited" else 2
        z = int(args.z) if args.z is not None else int(rng.integers(1, hi + 1))
        if not 1 <= z <= hi:
            raise ConfigError(f"--z must be in 1..{hi}")
        fn = {"qs2-and-cited": qs2_and_cited, "qs2-and-new": qs2_and_new,
              "broken-qs2-and-decode": qs2_and_new_bad_decode}[name]
        runs = [fn(a, b, z, session=session)]
        ref_dim, total = 2, 1
    elif name == "dot-demo":
        A, B = _bits(args.a, "--a"), _bits(args.b, "--b")
        R = cfg.r if cfg.r is not None else make_scheme(cfg).sample_randomness(rng)["R"]
        runs = [dot_product_demo(A, B, R, session=session)]
        ref_dim, total = 2, 1
    else:
        scheme = make_scheme(cfg)
        L = scheme.L
        if args.data:
            W = _parse_data(args.data, scheme.K)
            if cfg.instances is not None and W.shape[1] != cfg.instances:
                raise ConfigError("--data column count disagrees with --instances")
        else:
            W = rng.integers(0, scheme.alphabet, (scheme.K, cfg.instances if cfg.instances is not None else L))
        n = W.shape[1]
        if n < 1 or n % L:
            raise ConfigError(f"{name} with K={scheme.K} processes instances in batches of {L}; got {n}")
        if W.min() < 0 or W.max() >= scheme.alphabet:
            raise ConfigError(f"data must lie in 0..{scheme.alphabet - 1}")
        runs = []
        for start in range(0, n, L):
            cr = scheme.sample_randomness(rng)
            cr = CommonRandomness(cr.components, cfg.seed)
            runs.append(scheme.run(W[:, start : start + L], cr, session=session))
        ref_dim, total = scheme.ref_dim, n
    try:
        session.close()
    except UnpairedUseError as exc:
        raise ConfigError(f"{exc}; pass --pad or an instance count that pairs every use") from exc
    return {"command": "run", **_runs_report(runs, total, ref_dim, session)}, EXIT_OK


# -- verify ----------------------------------------------------------------------


def verification(scheme: Scheme, limit: int | None = None, backend: str | None = None) -> tuple[dict, list[str]]:
    """Correctness, security, CMI and rate for one scheme; returns (report, failed checks)."""
    enum = verify.enumerate_scheme(scheme, limit=limit, backend=backend)
    corr = verify.check_correctness_exhaustive(enum)
    sec = verify.check_security_exhaustive(enum)
    cmi = verify.conditional_mutual_information(enum)
    rate = verify.reconcile_rate(scheme)
    failed = []
    if not corr.passed:
        failed.append("correctness")
    if not sec.secure:
        failed.append("security")
    if not cmi.exact_zero:
        failed.append("cmi")
    if rate.verdict != "pass":
        failed.append("rate")
    if sec.secure != cmi.exact_zero:
        raise AssertionError("security verdict and zero-CMI disagree")
    report = {
        "enumeration": {
            "route": enum.route,
            "kernel": enum.backend,
            "data_points": enum.data_points,
            "evaluations": enum.evaluations,
        },
        "correctness": corr.to_dict(),
        "security": sec.to_dict(),
        "mutual_information": cmi.to_dict(),
        "rate": rate.to_dict(),
        "failed_checks": failed,
        "passed": not failed,
    }
    return report, failed


def cmd_verify(cfg: RunConfig, args) -> tuple[dict, int]:
    scheme = make_scheme(cfg)
    report, failed = verification(scheme, cfg.limit)
    report = {"command": "verify", "protocol": scheme.name, "params": scheme.params(), **report}
    return report, EXIT_VERIFY if failed else EXIT_OK


# -- sweep -----------------------------------------------------------------------

SWEEP_FIELDS = [
    "protocol", "d", "K", "L", "status", "exit_code", "rate", "rate_expression", "upper_bound",
    "lower_bound", "correctness", "security", "cmi_dits", "rate_verdict", "detail",
]


def _int_list(text: str | None) -> list[int | None]:
    if text is None:
        return [None]
    out: list[int | None] = []
    for part in filter(None, (t.strip() for t in text.split(","))):
        try:
            if "-" in part:
                lo, hi = part.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad integer list {text!r}") from exc
    return out


def sweep_cell(cell: tuple[RunConfig, str | None]) -> dict:
    cfg, backend = cell
    row = {f: "" for f in SWEEP_FIELDS} | {"protocol": cfg.protocol, "d": cfg.d, "K": cfg.k}
    try:
        scheme = make_scheme(cfg)
        row.update(d=scheme.ref_dim if cfg.protocol != "dot-demo" else 11, K=scheme.K, L=scheme.L)
        report, failed = verification(scheme, cfg.limit, backend)
    except ConfigError as exc:
        return row | {"status": "config-error", "exit_code": EXIT_CONFIG, "detail": str(exc)}
    except verify.LimitExceeded as exc:
        return row | {"status": "limit-exceeded", "exit_code": EXIT_LIMIT, "detail": str(exc)}
    except Exception as exc:  # noqa: BLE001 - one bad cell must not stop the sweep
        return row | {"status": "internal-error", "exit_code": EXIT_INTERNAL, "detail": f"{type(exc).__name__}: {exc}"}
    rate = report["rate"]
    row.update(
        status="fail" if failed else "pass",
        exit_code=EXIT_VERIFY if failed else EXIT_OK,
        rate=rate["achieved"],
        rate_expression=rate["symbolic"]["expression"],
        upper_bound=rate["upper_bound"],
        lower_bound=rate["lower_bound"] if rate["lower_bound"] is not None else "",
        correctness="pass" if report["correctness"]["passed"] else "fail",
        security=report["security"]["verdict"],
        cmi_dits=report["mutual_information"]["dits"],
        rate_verdict=rate["verdict"],
        detail=",".join(failed),
    )
    return row


def cmd_sweep(cfg: RunConfig, args) -> tuple[dict, int]:
    ds = _int_list(args.d_list) if cfg.protocol not in ("qsk-and",) else [None]
    ks = _int_list(args.k_list)
    cells = [(RunConfig(cfg.protocol, d=d, k=k, limit=cfg.limit, seed=cfg.seed), None) for d in ds for k in ks]
    if args.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(sweep_cell, cells))
    else:
        rows = [sweep_cell(c) for c in cells]
    codes = {r["exit_code"] for r in rows}
    code = next((c for c in (EXIT_INTERNAL, EXIT_VERIFY, EXIT_LIMIT, EXIT_CONFIG) if c in codes), EXIT_OK)
    return {"command": "sweep", "rows": rows}, code


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# -- list ------------------------------------------------------------------------


def cmd_list(cfg, args) -> tuple[dict, int]:
    items = []
    for name, cls in SCHEMES.items():
        if issubclass(cls, QSKProd):
            params = ["k"] if name == "qsk-and" else ["p", "r", "k"]
        elif issubclass(cls, QSKSum):
            params = ["d", "k"]
        else:
            params = []
        items.append({"name": name, "description": DESCRIPTIONS.get(name, ""), "params": params,
                      "negative_control": cls.negative_control})
    return {"command": "list-protocols", "protocols": items}, EXIT_OK


# -- plumbing ----------------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmacsec", description="Secure computation over a quantum multiple-access channel.")
    ap.add_argument("--version", action="version", version=f"qmacsec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, protocol=True):
        if protocol:
            p.add_argument("protocol_pos", nargs="?", metavar="PROTOCOL")
            p.add_argument("--protocol")
        p.add_argument("--limit", type=int, help="enumeration limit (default: $QMAC_SECCOMP_LIMIT or 1e8)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    run = sub.add_parser("run", help="execute a protocol once")
    common(run)
    run.add_argument("--d", type=int)
    run.add_argument("--p", type=int)
    run.add_argument("--r", type=int, help="field exponent (qsk-prod) or R value (dot-demo)")
    run.add_argument("--k", type=int)
    run.add_argument("--instances", type=int)
    run.add_argument("--mode", choices=("abstract", "quantum"), default="abstract")
    run.add_argument("--pad", action="store_true", help="pad unpaired channel uses in quantum mode")
    run.add_argument("--data", help="K x N JSON matrix of inputs (sampled from the seed if omitted)")
    run.add_argument("--a")
    run.add_argument("--b")
    run.add_argument("--z")

    ver = sub.add_parser("verify", help="exhaustive correctness, security, CMI and rate checks")
    common(ver)
    ver.add_argument("--d", type=int)
    ver.add_argument("--p", type=int)
    ver.add_argument("--r", type=int)
    ver.add_argument("--k", type=int)

    sw = sub.add_parser("sweep", help="verify over a parameter grid")
    common(sw)
    sw.add_argument("--d", dest="d_list", help="comma list or ranges, e.g. 2-5 or 3,5,7")
    sw.add_argument("--k", dest="k_list", help="comma list or ranges")
    sw.add_argument("--jobs", type=int, default=1)

    ls = sub.add_parser("list-protocols", help="show the protocol registry")
    common(ls, protocol=False)
    return ap


def _config(args) -> RunConfig:
    protocol = getattr(args, "protocol", None) or getattr(args, "protocol_pos", None)
    if getattr(args, "protocol", None) and getattr(args, "protocol_pos", None) and args.protocol != args.protocol_pos:
        raise ConfigError("conflicting protocol names")
    if args.command in ("run", "verify", "sweep") and not protocol:
        raise ConfigError("a protocol is required")
    return RunConfig(
        protocol=protocol or "",
        d=getattr(args, "d", None),
        p=getattr(args, "p", None),
        r=getattr(args, "r", None),
        k=getattr(args, "k", None),
        instances=getattr(args, "instances", None),
        mode=getattr(args, "mode", "abstract"),
        seed=args.seed,
        limit=verify.enumeration_limit(args.limit),
        out=args.out,
    )


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep, "list-protocols": cmd_list}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = _config(args)
        if args.format == "csv" and args.command != "sweep":
            raise ConfigError("CSV output is only available for sweep")
        body, code = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"qmacsec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except verify.LimitExceeded as exc:
        print(f"qmacsec: {exc}; use smaller d/K or raise --limit", file=sys.stderr)
        return EXIT_LIMIT
    except (ProtocolError, ChannelError, AlgebraError) as exc:
        print(f"qmacsec: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"qmacsec: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    if args.format == "csv":
        text = sweep_csv(body["rows"])
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "kernel_backend": kernels.BACKEND,
            "config": cfg.echo() if args.command != "list-protocols" else {},
            **body,
            "timing": {"seconds": round(time.perf_counter() - t0, 6)},
        }
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
