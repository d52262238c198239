"""Configuration-driven command line interface.

Two subcommands: ``solve`` runs a convergence study described by a JSON
config and writes ``table.csv``, per-row ``trace_<J>_<N>.csv`` files and a
``summary.json``; ``verify`` runs the small-size oracle suites (dense
spectral equivalence, exponential-sum certification, soft-threshold and
inexact-apply contracts) and reports pass/fail per invariant.

Exit codes: 0 success, 2 invalid configuration, 3 solver non-convergence
(partial artifacts are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .assembly import assemble, coercivity_constants
from .cases import CASE_IDS, manufactured_case
from .expsum import expsum_params, expsum_eval, preconditioner_for_system
from .lowrank import from_dense, soft_threshold, truncated_svd
from .solver import (TransformedOperator, derived_constants,
                     materialize_dense)
from .study import make_spec, run_convergence_study

SCHEMA_VERSION = 1

_DEFAULTS = dict(
    schema_version=SCHEMA_VERSION,
    case="TC1",
    scheme="SN",
    sizes=[128, 256],
    variant="st",
    tolerance_rule="fixed",
    eps=1e-7,
    eps_sum=0.1,
    delta0=0.1,
    theta=0.75,
    nu=0.5,
    tau1=None,
    tau2=None,
    eta0=0.1,
    max_iter=None,
    seed=0,
    jobs=1,
    output_dir="results",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Run-level hyperparameters; defaults match the reference experiments."""
    schema_version: int = SCHEMA_VERSION
    case: str = "TC1"
    scheme: str = "SN"
    sizes: list = field(default_factory=lambda: [128, 256])
    variant: str = "st"
    tolerance_rule: str = "fixed"
    eps: float = 1e-7
    eps_sum: float = 0.1
    delta0: float = 0.1
    theta: float = 0.75
    nu: float = 0.5
    tau1: float | None = None
    tau2: float | None = None
    eta0: float = 0.1
    max_iter: int | None = None
    seed: int = 0
    jobs: int = 1
    output_dir: str = "results"

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - set(_DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        merged = dict(_DEFAULTS, **raw)
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version "
                              f"{self.schema_version!r} (expected "
                              f"{SCHEMA_VERSION})")
        if self.case not in CASE_IDS:
            raise ConfigError(f"unknown case {self.case!r}")
        if self.scheme not in ("SN", "PN"):
            raise ConfigError(f"scheme must be 'SN' or 'PN'")
        if self.variant not in ("plain", "st", "st_inexact"):
            raise ConfigError(f"unknown solver variant {self.variant!r}")
        if self.tolerance_rule not in ("fixed", "scaled_0.1_over_J"):
            raise ConfigError(f"unknown tolerance_rule "
                              f"{self.tolerance_rule!r}")
        if (not isinstance(self.sizes, list) or not self.sizes
                or any(not isinstance(j, int) or j < 2 for j in self.sizes)
                or list(self.sizes) != sorted(set(self.sizes))):
            raise ConfigError("sizes must be a nonempty strictly ascending "
                              "list of integers >= 2")
        if not (0.0 < self.eps_sum < 1.0):
            raise ConfigError("eps_sum must lie in (0, 1)")
        for name in ("eps", "delta0", "eta0"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not (0.0 < self.theta <= 1.0):
            raise ConfigError("theta must lie in (0, 1]")
        if not (0.0 < self.nu < 1.0):
            raise ConfigError("nu must lie in (0, 1)")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        # tau bounds depend on the contraction factor of the configured case
        case = manufactured_case(self.case)
        spec = make_spec(case, self.scheme, self.sizes[0])
        gamma1, gamma2, _, _ = coercivity_constants(spec)
        _, _, _, rho = derived_constants(gamma1, gamma2, self.eps_sum)
        if self.tau1 is not None and not (0.0 < self.tau1 < 1.0):
            raise ConfigError("tau1 must lie in (0, 1)")
        if self.tau2 is not None and not (0.0 < self.tau2
                                          < 0.5 * (1.0 - rho)):
            raise ConfigError("tau2 must lie in (0, (1 - rho)/2)")

    def param_overrides(self) -> dict:
        out = dict(delta0=self.delta0, theta=self.theta, nu=self.nu,
                   eta0=self.eta0)
        if self.tau1 is not None:
            out["tau1"] = self.tau1
        if self.tau2 is not None:
            out["tau2"] = self.tau2
        if self.max_iter is not None:
            out["max_iter"] = self.max_iter
        return out


# -- serialization helpers --------------------------------------------------

def _fmt(x) -> str:
    """17-significant-digit decimal rendering for floats; plain str else."""
    if x is None:
        return ""
    if isinstance(x, float):
        if not np.isfinite(x):
            return str(x)
        return format(x, ".17g")
    return str(x)


def _json_render(obj, indent=0) -> str:
    """JSON text with floats at 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{json.dumps(str(k))}: {_json_render(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{_json_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not np.isfinite(obj):
            return json.dumps(str(obj))
        return format(obj, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(obj)


def _write_text(path: Path, text: str):
    path.write_text(text, newline="\n")


def _write_csv(path: Path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


# -- solve ------------------------------------------------------------------

_TABLE_COLUMNS = ["J", "N", "N_it", "err_L2", "rate_L2", "err_W2G",
                  "rate_W2G", "rank_W", "rank_U"]


def run_solve(config: ExperimentConfig, output_dir: str) -> int:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    case = manufactured_case(config.case)
    eps = config.eps if config.tolerance_rule == "fixed" else None

    rows = run_convergence_study(
        case, config.scheme, list(config.sizes),
        tolerance_rule=config.tolerance_rule,
        algorithm=config.variant, eps_sum=config.eps_sum,
        eps_target=eps, jobs=config.jobs,
        **config.param_overrides())

    columns = list(_TABLE_COLUMNS)
    if config.variant == "st_inexact":
        columns += ["r_inexact", "r_naive"]
    table = []
    for row in rows:
        rec = [row.J, row.N, row.n_it, row.err_l2, row.rate_l2, row.err_w2g,
               row.rate_w2g, row.rank_w, row.rank_u]
        if config.variant == "st_inexact":
            rec += [row.r_inexact, row.r_naive]
        table.append(rec)
    _write_csv(out / "table.csv", columns, table)

    for row in rows:
        if row.trace is None:
            continue
        trace_rows = [[it["k"], it["rank"], it["delta"], it["eta"],
                       it["res_norm"]] for it in row.trace.iterations]
        _write_csv(out / f"trace_{row.J}_{row.N}.csv",
                   ["k", "rank", "delta", "eta", "res_norm"], trace_rows)

    derived = []
    for row in rows:
        spec = make_spec(case, config.scheme, row.J)
        system = assemble(spec)
        approx = expsum_params(config.eps_sum, system.lam, system.Lam)
        _, _, omega, rho = derived_constants(system.gamma1, system.gamma2,
                                             config.eps_sum)
        derived.append(dict(J=row.J, N=row.N, gamma1=system.gamma1,
                            gamma2=system.gamma2, rho=rho, omega=omega,
                            r_p=approx.r_p, lam=system.lam, Lam=system.Lam))

    failed = [row for row in rows if not row.converged or row.error]
    summary = dict(config=asdict(config), derived_constants=derived,
                   converged=not failed,
                   failures=[dict(J=r.J, N=r.N, error=r.error or
                                  "did not converge within max_iter")
                             for r in failed])
    _write_text(out / "summary.json", _json_render(summary) + "\n")

    if failed:
        print(json.dumps({"error": "non-convergence",
                          "rows": [[r.J, r.N] for r in failed]}),
              file=sys.stderr)
        return 3
    return 0


# -- verify -----------------------------------------------------------------

def _check(name: str, ok: bool, detail: str = "") -> bool:
    status = "pass" if ok else "FAIL"
    line = f"[{status}] {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    return ok


def run_verify(config: ExperimentConfig) -> int:
    rng = np.random.default_rng(config.seed)
    ok = True
    case = manufactured_case(config.case)

    # dense spectral equivalence on small systems
    margin = []
    for J, N in ((4, 2), (8, 4), (16, 8)):
        spec = make_spec(case, config.scheme, J)
        spec = type(spec)(config.scheme, J, N, case.Z, case.sigma_t,
                          case.sigma_s)
        system = assemble(spec)
        precond = preconditioner_for_system(system, config.eps_sum)
        op = TransformedOperator(system, precond)
        a = materialize_dense(op)
        eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
        lo = (1.0 - config.eps_sum) ** 2 * system.gamma1
        hi = (1.0 + config.eps_sum) ** 2 * system.gamma2
        margin.append(eigs.min() >= lo * (1 - 1e-10)
                      and eigs.max() <= hi * (1 + 1e-10))
    ok &= _check("spectral equivalence (dense eigenvalues in "
                 "[(1-eps)^2 g1, (1+eps)^2 g2])", all(margin))

    # exponential-sum certification on the configured ladder
    cert = True
    for J in config.sizes[:3]:
        spec = make_spec(case, config.scheme, J)
        system = assemble(spec)
        approx = expsum_params(config.eps_sum, system.lam, system.Lam)
        t = np.exp(rng.uniform(np.log(system.lam), np.log(system.Lam),
                               10_000))
        rel = np.abs(expsum_eval(approx, t) - t ** -0.5) * np.sqrt(t)
        cert &= bool(np.max(rel) <= config.eps_sum)
    ok &= _check("exponential-sum relative error <= eps on sampled [lam,Lam]",
                 cert)

    # soft-threshold contract: non-expansiveness + truncation optimality
    st_ok = True
    for _ in range(100):
        m, n = rng.integers(3, 12, size=2)
        a = rng.standard_normal((m, n))
        b = rng.standard_normal((m, n))
        delta = float(rng.uniform(0.01, 2.0))
        sa = soft_threshold(from_dense(a), delta).todense()
        sb = soft_threshold(from_dense(b), delta).todense()
        st_ok &= (np.linalg.norm(sa - sb) <= np.linalg.norm(a - b) + 1e-12)
        tol = float(rng.uniform(0.01, 2.0))
        tr = truncated_svd(from_dense(a), tol)
        s = np.linalg.svd(a, compute_uv=False)
        tails = np.sqrt(np.cumsum((s ** 2)[::-1]))[::-1]
        keep = int(np.nonzero(tails <= tol)[0][0]) if np.any(tails <= tol) \
            else s.size
        err = np.linalg.norm(a - tr.todense())
        best = tails[keep] if keep < s.size else 0.0
        st_ok &= tr.rank == keep and abs(err - best) <= 1e-10
    ok &= _check("soft-threshold non-expansive, truncated SVD optimal "
                 "(randomized)", st_ok)

    # inexact apply within eta/2 of the exact apply
    spec = make_spec(case, config.scheme, 8)
    spec = type(spec)(config.scheme, 8, 4, case.Z, case.sigma_t, case.sigma_s)
    system = assemble(spec)
    precond = preconditioner_for_system(system, config.eps_sum)
    op = TransformedOperator(system, precond)
    inex_ok = True
    for _ in range(50):
        w = from_dense(rng.standard_normal(op.shape))
        eta = float(10.0 ** rng.uniform(-6, 0))
        gap = np.linalg.norm(op.apply(w).todense()
                             - op.apply_inexact(w, eta).todense())
        inex_ok &= gap <= 0.5 * eta * (1 + 1e-12)
    ok &= _check("inexact apply within eta/2 of exact apply (randomized)",
                 inex_ok)

    return 0 if ok else 1


# -- entry point ------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slabrank",
        description="Low-rank even-parity radiative transfer solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to JSON experiment config")
        p.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
        p.add_argument("--jobs", type=int, default=None,
                       help="override row-level parallelism")
    args = parser.parse_args(argv)

    try:
        config = ExperimentConfig.from_file(args.config)
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("jobs must be >= 1")
            config.jobs = args.jobs
    except (ConfigError, TypeError) as exc:
        print(json.dumps({"error": "invalid config", "detail": str(exc)}),
              file=sys.stderr)
        return 2

    if args.command == "verify":
        return run_verify(config)
    output_dir = args.output_dir or config.output_dir
    return run_solve(config, output_dir)


if __name__ == "__main__":
    sys.exit(main())
