"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 transport error,
4 numeric-bound error (plaintext headroom or encoding overflow).
"""

from __future__ import annotations

import json
import random
import signal
import sys
import threading
from pathlib import Path

import click
import numpy as np

from . import data as datamod
from .config import ENV_PREFIX, ConfigError, load_config

EXIT_CONFIG, EXIT_TRANSPORT, EXIT_BOUND = 2, 3, 4


def _overrides(**kw):
    return {k: v for k, v in kw.items() if v is not None}


def _cfg(ctx_obj, **kw):
    return load_config(ctx_obj.get("config"), _overrides(**kw))


class _JsonLog:
    def __init__(self, target):
        self.lock = threading.Lock()
        if target is None:
            self.fh = None
        elif target == "-":
            self.fh = sys.stdout
        else:
            self.fh = open(target, "w")

    def __call__(self, rec):
        if self.fh is None:
            return
        with self.lock:
            self.fh.write(json.dumps(rec, sort_keys=True) + "\n")
            self.fh.flush()

    def close(self):
        if self.fh not in (None, sys.stdout):
            self.fh.close()


def write_model(path, w, c: int) -> None:
    Path(path).write_text("".join(f"{v:.{c}f}\n" for v in np.asarray(w, dtype=np.float64)))


def read_model(path) -> np.ndarray:
    text = Path(path).read_text().split()
    return np.array([float(t) for t in text], dtype=np.float64)


@click.group(help=f"Secure sparse logistic regression between two parties. Config keys may be set via {ENV_PREFIX}<KEY>.")
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None, help="flat key = value config file")
@click.pass_context
def cli(ctx, config):
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@cli.command()
@click.option("--scheme", default=None)
@click.option("--bits", "key_bits", type=int, default=None)
@click.option("--owner", type=click.Choice(["A", "B"]), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="deterministic keys (testing only)")
@click.pass_obj
def keygen(obj, scheme, key_bits, owner, out_dir, seed):
    """Generate a key pair; writes <owner>.pub and <owner>.key."""
    from .he import keygen as _keygen
    from .he.keyfile import save_keypair

    cfg = _cfg(obj, scheme=scheme, key_bits=key_bits)
    rng = random.Random(f"keygen:{owner}:{seed}") if seed is not None else None
    kp = _keygen(cfg.he, rng, owner)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    pub, key = save_keypair(kp, out_dir, owner)
    click.echo(f"{pub}\n{key}")


@cli.command()
@click.option("--n", type=int, default=2000)
@click.option("--d", type=int, default=40)
@click.option("--density", type=float, default=0.1)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def synth(n, d, density, seed, out_path):
    """Seeded synthetic svmlight dataset with a planted separator."""
    datamod.write_synthetic(out_path, n, d, density, seed)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["svmlight", "csv"]), default="svmlight")
@click.option("--split", required=True, help="column ranges 'a_lo:a_hi,b_lo:b_hi'")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--n-features", type=int, default=None)
@click.option("--label-col", type=int, default=0)
@click.option("--test-frac", type=float, default=0.0, help="also write a held-out split under out/test")
@click.option("--seed", type=int, default=0)
def ingest(path, fmt, split, out_dir, n_features, label_col, test_frac, seed):
    """Partition a dataset vertically into party-local files."""
    try:
        X, y = datamod.read_dataset(path, fmt, n_features, label_col)
        X_a, X_b = datamod.split_columns(X, split)
    except datamod.SplitError as exc:
        raise ConfigError(str(exc)) from exc
    if test_frac > 0:
        tr, te = datamod.train_test_split(X.rows, test_frac, seed)
        m = datamod.write_party_files(X_a.take_rows(tr), X_b.take_rows(tr), y[tr], Path(out_dir) / "train")
        datamod.write_party_files(X_a.take_rows(te), X_b.take_rows(te), y[te], Path(out_dir) / "test")
    else:
        m = datamod.write_party_files(X_a, X_b, y, out_dir)
    click.echo(m.to_json())


def _load_keys(keys_dir, role):
    from .he.keyfile import load_keypair

    return load_keypair(Path(keys_dir) / f"{role}.key")


@cli.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--role", type=click.Choice(["A", "B"]), default=None)
@click.option("--simulate", is_flag=True, help="run both parties in this process")
@click.option("--keys", "keys_dir", type=click.Path(file_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--log", "log_path", default=None, help="JSON-lines log file, '-' for stdout")
@click.option("--checkpoint", "ckpt_dir", type=click.Path(file_okay=False), default=None)
@click.option("--resume", is_flag=True, help="resume from the checkpoint directory")
@click.option("--until-stopped", is_flag=True, help="(role A) train until SIGUSR1, then stop at a batch boundary")
@click.option("--epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.pass_obj
def train(obj, data_dir, role, simulate, keys_dir, out_dir, log_path, ckpt_dir, resume, until_stopped, **kw):
    """Train one party (--role) or both (--simulate)."""
    from .training.caesar import PartyA, PartyB, make_keys, train_in_process

    cfg = _cfg(obj, **kw)
    tc = cfg.train_config()
    if simulate == (role is not None):
        raise ConfigError("give exactly one of --role or --simulate")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if ckpt_dir:
        Path(ckpt_dir).mkdir(parents=True, exist_ok=True)
    log = _JsonLog(log_path)
    try:
        if simulate:
            X_a, _ = datamod.load_party(data_dir, "A")
            X_b, y = datamod.load_party(data_dir, "B")
            # a simulation: keys and masks are seeded for reproducibility
            keys = (_load_keys(keys_dir, "A"), _load_keys(keys_dir, "B")) if keys_dir else make_keys(cfg.he.scheme, cfg.key_bits, cfg.seed)
            res = train_in_process(
                X_a, X_b, y, tc, keys=keys, rng_seed=cfg.seed, checkpoint_dir=ckpt_dir,
                resume_dir=ckpt_dir if resume else None,
            )
            # thread interleaving is not deterministic; the record order is
            for rec in sorted(res.log, key=lambda r: (r.get("step", -1), r.get("event", ""), r.get("role", ""))):
                log(rec)
            write_model(out / "model_a.txt", res.w_a, cfg.c)
            write_model(out / "model_b.txt", res.w_b, cfg.c)
            log({"event": "done", "steps": res.steps, "bytes": res.stats_a.total_bytes() + res.stats_b.total_bytes()})
            return
        if not keys_dir:
            raise ConfigError("--keys is required with --role")
        from .protocols.transport import tcp_connect, tcp_listen

        X, y = datamod.load_party(data_dir, role)
        kp = _load_keys(keys_dir, role)
        stop = threading.Event()
        if role == "A":
            if until_stopped:
                signal.signal(signal.SIGUSR1, lambda *_: stop.set())
                log({"event": "ready", "role": "A"})
            ep = tcp_listen(cfg.addresses, "A", "B", timeout=cfg.timeout)
        else:
            ep = tcp_connect(cfg.addresses, "B", "A", timeout=cfg.timeout)
        ck = (Path(ckpt_dir) / f"party_{role}.ckpt") if ckpt_dir else None
        common = dict(stop_event=stop, log=log, checkpoint_path=ck, resume_from=ck if resume else None,
                      until_stopped=until_stopped)
        if role == "A":
            party = PartyA(X, ep, kp, tc, **common)
        else:
            party = PartyB(X, y, ep, kp, tc, **common)
        try:
            w = party.run()
        finally:
            ep.close()
        write_model(out / f"model_{role.lower()}.txt", tc.ring.signed(w).astype(np.float64) / 10**cfg.c, cfg.c)
        log({"event": "done", "role": role, "steps": party.steps_done, "bytes": ep.stats.total_bytes()})
    finally:
        log.close()


@cli.command("eval")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--model", "model_dir", type=click.Path(exists=True, file_okay=False), required=True)
def eval_cmd(data_dir, model_dir):
    """AUC, KS, F1 and recall at 90% precision of a trained model."""
    from .metrics import evaluate

    X_a, _ = datamod.load_party(data_dir, "A")
    X_b, y = datamod.load_party(data_dir, "B")
    w_a = read_model(Path(model_dir) / "model_a.txt")
    w_b = read_model(Path(model_dir) / "model_b.txt")
    if w_a.size != X_a.cols or w_b.size != X_b.cols:
        raise ConfigError("model dimensions do not match the data")
    click.echo(json.dumps(evaluate(datamod.predict(X_a, X_b, w_a, w_b), y), sort_keys=True))


@cli.command("bench-he")
@click.option("--scheme", type=click.Choice(["OU", "PAILLIER", "all"], case_sensitive=False), default="all")
@click.option("--bits", "key_bits", type=int, default=2048)
@click.option("--trials", type=int, default=1000)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def bench_he_cmd(scheme, key_bits, trials, seed, out_path):
    """CSV: scheme,op,mean_us,stddev_us."""
    from .he import HEParams
    from .he.bench import bench_he, rows_to_csv

    schemes = ["OU", "PAILLIER"] if scheme.lower() == "all" else [scheme]
    rows = []
    for s in schemes:
        rows += bench_he(HEParams(s, key_bits), trials, seed)
    text = rows_to_csv(rows)
    Path(out_path).write_text(text) if out_path else click.echo(text, nl=False)


def _int_list(text):
    return tuple(int(t) for t in str(text).split(",") if t.strip())


@cli.command("bench-comm")
@click.option("--n", type=int, default=4096)
@click.option("--dims", default="100,200,400")
@click.option("--batches", default="1024,4096")
@click.option("--bandwidths", default="10,20,30,40")
@click.option("--bits", "key_bits", type=int, default=1024)
@click.option("--density", type=float, default=0.1)
@click.option("--seed", type=int, default=0)
@click.option("--baseline", is_flag=True, help="also measure the dense secret-shared baseline")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def bench_comm_cmd(obj, n, dims, batches, bandwidths, key_bits, density, seed, baseline, out_path):
    """Per-epoch bytes and virtual transfer time, one row per bandwidth."""
    from .bench import COMM_FIELDS, bench_comm, rows_to_csv

    cfg = _cfg(obj)
    rows = bench_comm(n, _int_list(dims), _int_list(batches), _int_list(bandwidths), key_bits, cfg.scheme,
                      density, seed, cfg.workers, baseline)
    text = rows_to_csv(rows, COMM_FIELDS)
    Path(out_path).write_text(text) if out_path else click.echo(text, nl=False)


@cli.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--keys", "keys_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--epochs", "T", type=int, default=None, help="stop after this many epochs")
@click.option("--timeout", type=float, default=3600.0)
@click.pass_obj
def coordinate(obj, data_dir, keys_dir, out_dir, T, timeout):
    """Launch both parties over TCP and stop them after T epochs."""
    from .coordinator import run_coordinator

    cfg = _cfg(obj, epochs=T)
    summary = run_coordinator(obj.get("config"), data_dir, keys_dir, out_dir, cfg.epochs, timeout)
    click.echo(json.dumps(summary, sort_keys=True))
    if summary["exit_a"] or summary["exit_b"]:
        sys.exit(max(summary["exit_a"], summary["exit_b"]))


def main(argv=None):
    from .he.core import ParameterError, PlaintextRangeError
    from .protocols.transport import ProtocolError, TransportError
    from .ring import EncodingOverflow
    from .sparse import ParseError

    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_CONFIG)
    except (ConfigError, ParameterError, ParseError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (TransportError, ProtocolError, ConnectionError) as exc:
        click.echo(f"transport error: {exc}", err=True)
        sys.exit(EXIT_TRANSPORT)
    except (PlaintextRangeError, EncodingOverflow) as exc:
        click.echo(f"numeric bound error: {exc}", err=True)
        sys.exit(EXIT_BOUND)
    sys.exit(0)


if __name__ == "__main__":
    main()
