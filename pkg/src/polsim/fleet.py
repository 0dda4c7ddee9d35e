"""Multi-process fleet orchestration: job-queue and fork-join scheduling.

Each job runs the simulator as an isolated child process (the engine is
single-threaded by contract, so parallelism comes only from running many
instances). Job status persists to ``status.txt`` in each job's output
directory via atomic rename, which makes orchestrations restartable: jobs
already ``done`` are skipped on a rerun, ``running``/``failed`` ones rerun.

Scheduling modes:
  * queue     - ``workers`` slots each pull the next pending job in manifest
                order as soon as they free up; no barriers.
  * forkjoin  - jobs grouped into generations; each generation runs on the
                worker slots and a barrier waits for its slowest member. An
                optional ``next_gen_command`` runs at every barrier with the
                finished generation's output directories as arguments; if its
                last stdout line names a manifest file with jobs, those jobs
                are appended as a new generation (genetic-algorithm style).
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError, OrchestratorError
from .logio import concat_logs

SIM_BIN_ENV = "POL_SIM_BIN"

PENDING = "pending"
RUNNING = "running"
DONE = "done"
FAILED = "failed"


@dataclass
class JobSpec:
    job_id: str
    map_path: str
    config_path: str | None
    out_dir: str
    overrides: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class Manifest:
    mode: str = "queue"
    workers: int = 1
    jobs: list[JobSpec] = field(default_factory=list)
    generations: list[list[str]] = field(default_factory=list)
    next_gen_command: str | None = None

    def job(self, job_id: str) -> JobSpec:
        for j in self.jobs:
            if j.job_id == job_id:
                return j
        raise OrchestratorError(f"unknown job id {job_id!r}")


@dataclass
class RunStatus:
    job_id: str
    state: str = PENDING
    exit_code: int | None = None
    wall_seconds: float = 0.0


def parse_manifest(path: str) -> Manifest:
    """Flat-text manifest: global keys, then one ``[job <id>]`` section per job.

    Global keys: mode, workers, generation (repeatable, comma-separated job
    ids in order), next_gen_command. Job keys: map, config, out, and
    repeatable ``set = key=value`` overrides.
    """
    man = Manifest()
    current: JobSpec | None = None
    seen_ids: set[str] = set()
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise OrchestratorError(f"cannot read manifest {path}: {exc}") from exc

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section.startswith("job ") or not section[4:].strip():
                raise ConfigError(f"{path}:{lineno}: expected section '[job <id>]'")
            job_id = section[4:].strip()
            if job_id in seen_ids:
                raise ConfigError(f"{path}:{lineno}: duplicate job id {job_id!r}")
            seen_ids.add(job_id)
            current = JobSpec(job_id=job_id, map_path="", config_path=None, out_dir="")
            man.jobs.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if current is None:
            if key == "mode":
                man.mode = value
            elif key == "workers":
                man.workers = int(value)
            elif key == "generation":
                man.generations.append([j.strip() for j in value.split(",") if j.strip()])
            elif key == "next_gen_command":
                man.next_gen_command = value
            else:
                raise ConfigError(f"{path}:{lineno}: unknown manifest key {key!r}")
        else:
            if key == "map":
                current.map_path = value
            elif key == "config":
                current.config_path = value
            elif key == "out":
                current.out_dir = value
            elif key == "set":
                if "=" not in value:
                    raise ConfigError(f"{path}:{lineno}: override must look like key=value")
                k, v = value.split("=", 1)
                current.overrides.append((k.strip(), v.strip()))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown job key {key!r}")

    validate_manifest(man)
    return man


def validate_manifest(man: Manifest) -> None:
    if man.mode not in ("queue", "forkjoin"):
        raise OrchestratorError(f"mode must be queue|forkjoin, got {man.mode!r}")
    if man.workers < 1:
        raise OrchestratorError("workers must be >= 1")
    if not man.jobs:
        raise OrchestratorError("manifest has no jobs")
    outs = set()
    for job in man.jobs:
        if not job.map_path or not job.out_dir:
            raise OrchestratorError(f"job {job.job_id!r} needs 'map' and 'out'")
        norm = os.path.normpath(job.out_dir)
        if norm in outs:
            raise OrchestratorError(f"output dir {job.out_dir!r} used by more than one job")
        outs.add(norm)
    if man.mode == "forkjoin":
        if not man.generations:
            # Default: every job in one generation, in manifest order.
            man.generations = [[j.job_id for j in man.jobs]]
        listed = [j for gen in man.generations for j in gen]
        if sorted(listed) != sorted(j.job_id for j in man.jobs):
            raise OrchestratorError("forkjoin generations must partition the job set")


def simulator_command() -> list[str]:
    """Base argv for one simulation run; POL_SIM_BIN overrides the executable."""
    override = os.environ.get(SIM_BIN_ENV)
    if override:
        parts = shlex.split(override)
        exe = shutil.which(parts[0]) or (parts[0] if os.path.exists(parts[0]) else None)
        if exe is None:
            raise OrchestratorError(f"{SIM_BIN_ENV} points to missing executable {parts[0]!r}")
        return [exe] + parts[1:]
    return [sys.executable, "-m", "polsim"]


def job_command(base: list[str], job: JobSpec) -> list[str]:
    cmd = list(base) + ["run", "--map", job.map_path, "--out", job.out_dir]
    if job.config_path:
        cmd += ["--config", job.config_path]
    for k, v in job.overrides:
        cmd += ["--set", f"{k}={v}"]
    return cmd


def _status_path(job: JobSpec) -> str:
    return os.path.join(job.out_dir, "status.txt")


def write_status(job: JobSpec, status: RunStatus) -> None:
    os.makedirs(job.out_dir, exist_ok=True)
    path = _status_path(job)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("polstatus/1\n")
        f.write(f"job_id = {status.job_id}\n")
        f.write(f"state = {status.state}\n")
        f.write(f"exit_code = {'' if status.exit_code is None else status.exit_code}\n")
        f.write(f"wall_seconds = {status.wall_seconds:.6f}\n")
    os.replace(tmp, path)


def read_status(job: JobSpec) -> RunStatus | None:
    path = _status_path(job)
    if not os.path.exists(path):
        return None
    status = RunStatus(job_id=job.job_id)
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline().strip()
            if header != "polstatus/1":
                return None
            for line in f:
                if "=" not in line:
                    continue
                key, value = (s.strip() for s in line.split("=", 1))
                if key == "state":
                    status.state = value
                elif key == "exit_code":
                    status.exit_code = int(value) if value else None
                elif key == "wall_seconds":
                    status.wall_seconds = float(value)
    except OSError:
        return None
    return status


def _execute_job(base_cmd: list[str], job: JobSpec, statuses: dict[str, RunStatus], lock: threading.Lock) -> None:
    status = RunStatus(job_id=job.job_id, state=RUNNING)
    write_status(job, status)
    with lock:
        statuses[job.job_id] = status
    t0 = time.perf_counter()
    try:
        proc = subprocess.run(job_command(base_cmd, job), stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        code = proc.returncode
    except OSError:
        code = -1
    status.wall_seconds = time.perf_counter() - t0
    status.exit_code = code
    status.state = DONE if code == 0 else FAILED
    write_status(job, status)


def _run_batch(jobs: list[JobSpec], workers: int, statuses: dict[str, RunStatus]) -> None:
    """List-schedule ``jobs`` in order onto ``workers`` slots; waits for all."""
    base_cmd = simulator_command()
    pending = deque(jobs)
    lock = threading.Lock()

    def worker() -> None:
        while True:
            with lock:
                if not pending:
                    return
                job = pending.popleft()
            _execute_job(base_cmd, job, statuses, lock)

    threads = [threading.Thread(target=worker) for _ in range(min(workers, len(jobs)))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def _restartable_jobs(man: Manifest, job_ids: list[str], statuses: dict[str, RunStatus]) -> list[JobSpec]:
    """Jobs still needing a run; already-done jobs keep their persisted status."""
    todo = []
    for job_id in job_ids:
        job = man.job(job_id)
        prior = read_status(job)
        if prior is not None and prior.state == DONE:
            statuses[job_id] = prior
            continue
        statuses[job_id] = RunStatus(job_id=job_id, state=PENDING)
        write_status(job, statuses[job_id])
        todo.append(job)
    return todo


def run_queue(man: Manifest) -> list[RunStatus]:
    """Job-queue scheduling: no barriers, maximum slot utilization."""
    if man.mode != "queue":
        raise OrchestratorError(f"run_queue on manifest with mode {man.mode!r}")
    simulator_command()  # fail before any job starts if the binary is missing
    statuses: dict[str, RunStatus] = {}
    todo = _restartable_jobs(man, [j.job_id for j in man.jobs], statuses)
    _run_batch(todo, man.workers, statuses)
    return [statuses[j.job_id] for j in man.jobs]


def run_forkjoin(man: Manifest) -> list[RunStatus]:
    """Generation-by-generation scheduling with a barrier after each."""
    if man.mode != "forkjoin":
        raise OrchestratorError(f"run_forkjoin on manifest with mode {man.mode!r}")
    simulator_command()
    statuses: dict[str, RunStatus] = {}
    generations = [list(g) for g in man.generations]
    gi = 0
    while gi < len(generations):
        gen = generations[gi]
        todo = _restartable_jobs(man, gen, statuses)
        _run_batch(todo, man.workers, statuses)
        if man.next_gen_command:
            addendum = _invoke_next_gen(man, gen)
            if addendum:
                generations.append(addendum)
        gi += 1
    ordered = [j.job_id for j in man.jobs]
    return [statuses[job_id] for job_id in ordered if job_id in statuses]


def _invoke_next_gen(man: Manifest, finished_gen: list[str]) -> list[str] | None:
    """Run the barrier hook; returns job ids of an appended generation, if any."""
    out_dirs = [man.job(job_id).out_dir for job_id in finished_gen]
    cmd = shlex.split(man.next_gen_command) + out_dirs
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    except OSError as exc:
        raise OrchestratorError(f"next_gen_command failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise OrchestratorError(
            f"next_gen_command exited {proc.returncode} after generation {finished_gen}"
        )
    lines = [line.strip() for line in proc.stdout.splitlines() if line.strip()]
    if not lines:
        return None
    addendum_path = lines[-1]
    addendum = parse_addendum(addendum_path, man)
    return addendum


def parse_addendum(path: str, man: Manifest) -> list[str] | None:
    """Merge an addendum manifest's jobs into ``man``; returns their ids."""
    if not os.path.exists(path):
        raise OrchestratorError(f"next_gen_command announced missing manifest {path!r}")
    sub = Manifest()
    current: JobSpec | None = None
    with open(path, encoding="utf-8") as f:
        text = f.read()
    existing = {j.job_id for j in man.jobs}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            job_id = line[1:-1].strip()[4:].strip()
            if job_id in existing:
                raise OrchestratorError(f"addendum {path}:{lineno}: job id {job_id!r} already exists")
            current = JobSpec(job_id=job_id, map_path="", config_path=None, out_dir="")
            sub.jobs.append(current)
        elif "=" in line and current is not None:
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "map":
                current.map_path = value
            elif key == "config":
                current.config_path = value
            elif key == "out":
                current.out_dir = value
            elif key == "set":
                k, v = value.split("=", 1)
                current.overrides.append((k.strip(), v.strip()))
    if not sub.jobs:
        return None
    for job in sub.jobs:
        if not job.map_path or not job.out_dir:
            raise OrchestratorError(f"addendum job {job.job_id!r} needs 'map' and 'out'")
    man.jobs.extend(sub.jobs)
    return [j.job_id for j in sub.jobs]


def collect(man: Manifest, out_dir: str) -> dict[str, str]:
    """Merge logs of all done jobs (manifest order); failed jobs go to collect.report."""
    done_jobs = []
    failed = []
    for job in man.jobs:
        status = read_status(job)
        if status is not None and status.state == DONE:
            done_jobs.append(job)
        else:
            failed.append((job.job_id, status.state if status else "missing"))
    if not done_jobs:
        raise OrchestratorError("collect: no done jobs to merge")
    os.makedirs(out_dir, exist_ok=True)
    merged = concat_logs([j.out_dir for j in done_jobs], out_dir, run_ids=[j.job_id for j in done_jobs])
    with open(os.path.join(out_dir, "collect.report"), "w", encoding="utf-8", newline="\n") as f:
        f.write("polcollect/1\n")
        f.write(f"merged_jobs = {','.join(j.job_id for j in done_jobs)}\n")
        if failed:
            f.write(f"excluded_jobs = {','.join(jid for jid, _ in failed)}\n")
            for jid, state in failed:
                f.write(f"excluded: {jid} ({state})\n")
        else:
            f.write("excluded_jobs =\n")
    return merged
