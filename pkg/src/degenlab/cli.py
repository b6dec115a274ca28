"""Command-line client for the experiment service.

The CLI is a thin client: every subcommand builds a request, sends it
to the HTTP service (an in-process instance by default, or a remote
server via ``--server``), and writes the returned report JSON and CSV
tables to the output directory.  Configuration files are TOML
(primary) or JSON.  The exit status is 0 exactly when every check in
the report passed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:                                    # Python < 3.11
    import tomli as tomllib

import httpx

from . import __version__


def load_config(path) -> dict:
    """TOML (primary) or JSON configuration file."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(data.decode("utf-8"))
    try:
        return tomllib.loads(data.decode("utf-8"))
    except tomllib.TOMLDecodeError:
        try:
            return json.loads(data.decode("utf-8"))
        except json.JSONDecodeError:
            raise SystemExit(f"cannot parse {path} as TOML or JSON")


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    # in-process client speaking HTTP to the ASGI app directly
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    from .service import get_app
    return TestClient(get_app())


def _post(client: httpx.Client, route: str, payload: dict) -> dict:
    resp = client.post(route, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise SystemExit(f"error ({resp.status_code}): {detail}")
    return resp.json()


def write_outputs(body: dict, outdir: Path, stem: str) -> list[str]:
    """Report JSON, per-table CSVs ('.' decimal, UTF-8), timing JSON."""
    from .experiments import canonical_json
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for tname in sorted(body.get("tables", {})):
        tab = body["tables"][tname]
        fname = f"{stem}_{tname}.csv"
        with open(outdir / fname, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(tab["header"])
            writer.writerows(tab["rows"])
        files.append(fname)
    report = body["report"]
    report["artifacts"] = files
    rname = f"{stem}_report.json"
    (outdir / rname).write_text(canonical_json(report), encoding="utf-8")
    (outdir / f"{stem}_timing.json").write_text(
        json.dumps({"wall_clock_seconds": body.get("wall_clock")}) + "\n",
        encoding="utf-8")
    return files + [rname]


def _print_summary(report: dict) -> None:
    print(f"experiment: {report['experiment']}")
    for c in report["checks"]:
        mark = "PASS" if c["pass"] else "FAIL"
        print(f"  [{mark}] {c['name']}: measured={c['measured']} "
              f"expected={c['expected']} tol={c['tolerance']}")
    print(f"overall: {'PASS' if report['overall_pass'] else 'FAIL'}")


def _run_and_write(client, experiment: str, params: dict,
                   outdir: Path) -> int:
    body = _post(client, "/run", {"experiment": experiment,
                                  "params": params})
    write_outputs(body, outdir, experiment)
    _print_summary(body["report"])
    return 0 if body["report"]["overall_pass"] else 1


def _config_params(args, required: bool = False) -> dict:
    if getattr(args, "config", None):
        return load_config(args.config)
    if required:
        raise SystemExit("this subcommand needs --config")
    return {}


def cmd_exponents(args, client) -> int:
    params = _config_params(args)
    for key in ("a", "n", "ratio", "depth"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    return _run_and_write(client, "exponents", params, Path(args.outdir))


def cmd_solve(args, client) -> int:
    cfg = _config_params(args, required=True)
    params = {"problem": cfg.get("problem", cfg)}
    if "seed" in cfg:
        params["seed"] = cfg["seed"]
    return _run_and_write(client, "solve", params, Path(args.outdir))


def cmd_analyze(args, client) -> int:
    cfg = _config_params(args, required=True)
    params = {"problem": cfg.get("problem", cfg)}
    if "seed" in cfg:
        params["seed"] = cfg["seed"]
    return _run_and_write(client, "analyze", params, Path(args.outdir))


INEQ_EXPERIMENTS = ("hardy", "poincare", "sobolev", "trace_scaling",
                    "capacity", "muckenhoupt")


def cmd_ineq(args, client) -> int:
    if args.check not in INEQ_EXPERIMENTS:
        raise SystemExit(f"unknown inequality check {args.check!r}; "
                         f"choose from {', '.join(INEQ_EXPERIMENTS)}")
    params = _config_params(args)
    if args.seed is not None:
        params["seed"] = args.seed
    return _run_and_write(client, args.check, params, Path(args.outdir))


def cmd_extend(args, client) -> int:
    params = _config_params(args)
    if args.s is not None:
        params["s"] = args.s
    if args.n is not None:
        params["n"] = args.n
    if args.dminusn is not None:
        params["d"] = args.dminusn + params.get("n", 2)
    if args.data is not None:
        if args.data in ("gaussian", "bump"):
            params["data"] = args.data
        else:
            values = []
            with open(args.data, newline="", encoding="utf-8") as fh:
                for row in csv.reader(fh):
                    if not row:
                        continue
                    try:
                        values.append(float(row[-1]))
                    except ValueError:
                        continue  # header line
            params["data"] = values
            params.setdefault("num_points", len(values))
    return _run_and_write(client, "extend", params, Path(args.outdir))


def cmd_sweep(args, client) -> int:
    cfg = load_config(args.config)
    if "experiment" not in cfg or "sweep" not in cfg:
        raise SystemExit("sweep configs need 'experiment' and a [sweep] "
                         "table of ranged parameters")
    payload = {"experiment": cfg["experiment"],
               "base": cfg.get("params", {}),
               "ranges": cfg["sweep"]}
    if "cap" in cfg:
        payload["cap"] = cfg["cap"]
    body = _post(client, "/sweep", payload)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    agg = body["aggregate"]
    with open(outdir / "sweep_aggregate.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(agg["header"])
        writer.writerows(agg["rows"])
    from .experiments import canonical_json
    (outdir / "sweep_reports.json").write_text(
        canonical_json({"reports": body["reports"]}), encoding="utf-8")
    ok = all(r["overall_pass"] for r in body["reports"])
    print(f"sweep of {cfg['experiment']}: {len(body['reports'])} points, "
          f"{'all PASS' if ok else 'FAILURES present'}")
    return 0 if ok else 1


def cmd_suite(args, client) -> int:
    body = _post(client, "/suite", {"seed": args.seed})
    write_outputs(body, Path(args.outdir), "suite")
    report = body["report"]
    for c in report["checks"]:
        mark = "PASS" if c["pass"] else "FAIL"
        print(f"  [{mark}] {c['name']} ({c['measured']}/{c['expected']})")
    print(f"suite: {'PASS' if report['overall_pass'] else 'FAIL'}")
    return 0 if report["overall_pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degenlab",
        description="Experiments on degenerate/singular weighted elliptic "
                    "problems.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: "
                             "in-process)")
    parser.add_argument("-o", "--outdir", default="degenlab_out",
                        help="output directory for reports and CSVs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", help="threshold and indicial exponents")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("solve", help="solve a configured problem")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("analyze", help="solve and measure regularity")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ineq", help="functional-inequality checks")
    p.add_argument("check", choices=INEQ_EXPERIMENTS)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_ineq)

    p = sub.add_parser("extend", help="fractional-Laplacian extension")
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dminusn", type=int, default=None)
    p.add_argument("--data", default=None,
                   help="gaussian, bump, or a CSV file of samples")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("suite", help="run the full acceptance battery")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with make_client(args.server) as client:
        return args.func(args, client)


if __name__ == "__main__":
    sys.exit(main())
