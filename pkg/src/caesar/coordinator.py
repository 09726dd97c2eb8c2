"""Start both parties as processes, count epochs, and stop them.

Party A runs in until-stopped mode and reports ``epoch_end`` events on
stdout.  Once ``T`` epochs are done the coordinator sends SIGUSR1 to A,
which finishes the batch in flight, tells B to stop and both reconstruct.
"""

from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _party_cmd(config, role, data_dir, keys_dir, out_dir, extra=()):
    cmd = [sys.executable, "-m", "caesar.cli"]
    if config:
        cmd += ["--config", str(config)]
    cmd += ["train", "--role", role, "--data", str(data_dir), "--keys", str(keys_dir), "--out", str(out_dir)]
    return cmd + list(extra)


def run_coordinator(config, data_dir, keys_dir, out_dir, T: int, timeout: float = 3600.0, env=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = dict(os.environ if env is None else env)
    env.setdefault("CAESAR_ADDRESSES", f"127.0.0.1:{free_port()}")
    env.pop("CAESAR_EPOCHS", None)
    log_b = out / "party_b.log"
    pa = subprocess.Popen(
        _party_cmd(config, "A", data_dir, keys_dir, out, ["--until-stopped", "--log", "-"]),
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, env=env,
    )
    pb = subprocess.Popen(
        _party_cmd(config, "B", data_dir, keys_dir, out, ["--log", str(log_b)]),
        stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, text=True, env=env,
    )
    deadline = time.monotonic() + timeout
    epochs_seen, signalled_at, last_step = 0, None, None
    events = []
    try:
        for line in pa.stdout:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue
            events.append(rec)
            # A has its signal handler once it reports ready
            if rec.get("event") == "ready" and T <= 0:
                pa.send_signal(signal.SIGUSR1)
                signalled_at = 0
            if rec.get("event") == "batch":
                last_step = rec["step"]
            if rec.get("event") == "epoch_end":
                epochs_seen = rec["epoch"] + 1
                if epochs_seen >= T and signalled_at is None:
                    pa.send_signal(signal.SIGUSR1)
                    signalled_at = rec["step"]
            if time.monotonic() > deadline:
                raise TimeoutError("training did not finish in time")
        code_a = pa.wait(max(1.0, deadline - time.monotonic()))
        code_b = pb.wait(max(1.0, deadline - time.monotonic()))
    except BaseException:
        pa.kill()
        pb.kill()
        raise
    done = [e for e in events if e.get("event") == "done"]
    (out / "party_a.log").write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in events))
    return {
        "epochs_seen": epochs_seen,
        "signalled_at_step": signalled_at,
        "last_batch_step": last_step,
        "steps": done[0]["steps"] if done else None,
        "exit_a": code_a,
        "exit_b": code_b,
        "stderr_a": pa.stderr.read()[-2000:],
        "stderr_b": pb.stderr.read()[-2000:],
    }
