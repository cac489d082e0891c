import logging
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

from errors import LabError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

logger = logging.getLogger("worker")


def sweep(fn, items, workers=1):
    """Map fn over items, optionally on a thread pool; results keep the order of items."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


class RunLogHandler(logging.Handler):
    FLUSH_EVERY = 20

    def __init__(self, run_id, session_factory):
        super().__init__()
        self.run_id = run_id
        self.session_factory = session_factory
        self._buffer = []

    def emit(self, record):
        timestamp = datetime.now().strftime('%H:%M:%S')
        self._buffer.append(f"\n[{timestamp}] {self.format(record)}")
        if len(self._buffer) >= self.FLUSH_EVERY:
            self.flush()

    def flush(self):
        if not self._buffer:
            return
        pending = "".join(self._buffer)
        self._buffer.clear()
        from database import session_scope
        from models import Run
        try:
            with session_scope(self.session_factory) as session:
                run = session.get(Run, self.run_id)
                if run:
                    run.logs = (run.logs or "") + pending
        except Exception:
            pass


@dataclass
class RunOutcome:
    command: str
    status: str
    exit_code: int
    result: object = None
    error: str = None
    traceback: str = None
    run_id: int = None
    manifest_path: str = None
    started_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    finished_at: datetime = None


def _finite(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def process_run(command, fn, cfg, write_manifest):
    """
    Execute one laboratory command end to end.
    fn(cfg) returns a command result (with .passed and .checks); write_manifest(outcome)
    writes the run manifest and returns its path. Failures are logged and recorded,
    never raised.
    """
    logger.info(f"Processing run: {command}")
    outcome = RunOutcome(command=command, status='processing', exit_code=EXIT_OK)

    # 1. Setup Ledger
    factory = None
    handler = None
    if cfg.db_path is not None:
        try:
            from database import init_db, session_scope
            from models import Run
            factory = init_db(cfg.db_path)
            with session_scope(factory) as session:
                run = Run(command=command, status='processing', config_text=cfg.echo_text(), logs="")
                session.add(run)
                session.flush()
                outcome.run_id = run.id
            handler = RunLogHandler(outcome.run_id, factory)
            handler.setLevel(logging.INFO)
            handler.setFormatter(logging.Formatter('%(levelname)s - %(name)s - %(message)s'))
            logging.getLogger().addHandler(handler)
        except Exception as e:
            logger.warning(f"Run ledger unavailable ({cfg.db_path}): {e}")
            factory = None

    # 2. Run Command
    try:
        result = fn(cfg)
        outcome.result = result
        if result.passed is False:
            outcome.status = 'failed'
            outcome.exit_code = EXIT_CHECK_FAILED
            logger.warning(f"Run {command} finished with failing checks")
        else:
            outcome.status = 'completed'
            logger.info(f"Run {command} completed")
    except LabError as e:
        logger.error(f"Run Failed: {type(e).__name__}: {e}")
        outcome.status = 'error'
        outcome.exit_code = EXIT_ERROR
        outcome.error = f"{type(e).__name__}: {e}"
        outcome.traceback = traceback.format_exc()
    except Exception as e:
        logger.error(f"Run Failed (unexpected): {e}")
        outcome.status = 'error'
        outcome.exit_code = EXIT_ERROR
        outcome.error = f"{type(e).__name__}: {e}"
        outcome.traceback = traceback.format_exc()
        logger.debug(outcome.traceback)

    outcome.finished_at = datetime.now(timezone.utc)

    # 3. Write Manifest
    try:
        outcome.manifest_path = str(write_manifest(outcome))
    except Exception as e:
        logger.error(f"Could not write run manifest: {e}")
        outcome.status = 'error'
        outcome.exit_code = EXIT_ERROR

    # 4. Close Ledger Entry
    if handler is not None:
        handler.flush()
        logging.getLogger().removeHandler(handler)
    if factory is not None:
        try:
            _record(factory, outcome)
        except Exception as e:
            logger.warning(f"Could not update run ledger: {e}")

    return outcome


def _record(factory, outcome):
    from database import session_scope
    from models import CheckResult, Run
    with session_scope(factory) as session:
        run = session.get(Run, outcome.run_id)
        if run is None:
            return
        run.status = outcome.status
        run.exit_code = outcome.exit_code
        run.manifest_path = outcome.manifest_path
        if outcome.traceback:
            run.logs = (run.logs or "") + f"\n\nCRITICAL ERROR:\n{outcome.traceback}"
        checks = getattr(outcome.result, "checks", None) or []
        for check in checks:
            run.checks.append(CheckResult(
                name=check.name,
                value=_finite(check.value),
                tolerance=_finite(check.tolerance),
                passed=bool(check.passed),
            ))
