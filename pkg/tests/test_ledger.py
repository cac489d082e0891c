from __future__ import annotations

import logging
from types import SimpleNamespace

import pytest

from cli import CheckOutcome, CommandResult
from database import init_db, session_scope
from errors import KahlerConeError
from models import CheckResult, Run
from worker import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, process_run, sweep


def _cfg(db_path):
    return SimpleNamespace(db_path=db_path, echo_text=lambda: "steps = 1\n")


def _manifest_writer(tmp_path):
    def write(outcome):
        path = tmp_path / f"{outcome.command}_manifest.json"
        path.write_text(outcome.status, encoding="utf-8")
        return path
    return write


def test_sweep_keeps_input_order() -> None:
    def square(m):
        return m * m

    assert sweep(square, [5, 1, 4, 2, 3], workers=3) == [25, 1, 16, 4, 9]
    assert sweep(square, [], workers=4) == []
    assert sweep(square, (7,)) == [49]


def test_completed_run_is_recorded_with_checks(tmp_path, caplog) -> None:
    caplog.set_level(logging.INFO)
    db_path = tmp_path / "ledger" / "runs.db"

    def command(cfg):
        logging.getLogger("cli").info("evaluating probes")
        checks = [
            CheckOutcome(name="fs_balance", value=1e-15, tolerance=1e-10, passed=True),
            CheckOutcome(name="corrector_order", value=float("nan"), tolerance=2.75, passed=True),
        ]
        return CommandResult(checks=checks, passed=True)

    outcome = process_run("check", command, _cfg(db_path), _manifest_writer(tmp_path))
    assert outcome.exit_code == EXIT_OK
    assert outcome.status == "completed"

    factory = init_db(db_path)
    with factory() as session:
        run = session.get(Run, outcome.run_id)
        assert run.status == "completed"
        assert run.exit_code == EXIT_OK
        assert run.config_text == "steps = 1\n"
        assert "evaluating probes" in run.logs
        checks = session.query(CheckResult).filter_by(run_id=run.id).order_by(CheckResult.id).all()
        assert [c.name for c in checks] == ["fs_balance", "corrector_order"]
        assert checks[1].value is None


def test_failing_checks_exit_with_two(tmp_path) -> None:
    outcome = process_run("check", lambda cfg: CommandResult(passed=False), _cfg(None), _manifest_writer(tmp_path))
    assert outcome.exit_code == EXIT_CHECK_FAILED
    assert outcome.status == "failed"
    assert outcome.run_id is None
    assert (tmp_path / "check_manifest.json").read_text(encoding="utf-8") == "failed"


def test_lab_errors_are_recorded_not_raised(tmp_path) -> None:
    db_path = tmp_path / "runs.db"

    def command(cfg):
        raise KahlerConeError("potential leaves the cone", m=3, min_density=-0.2)

    outcome = process_run("correct", command, _cfg(db_path), _manifest_writer(tmp_path))
    assert outcome.exit_code == EXIT_ERROR
    assert outcome.error.startswith("KahlerConeError")

    with init_db(db_path)() as session:
        run = session.get(Run, outcome.run_id)
        assert run.status == "error"
        assert "CRITICAL ERROR" in run.logs
        assert "potential leaves the cone" in run.logs


def test_no_ledger_when_disabled(tmp_path) -> None:
    outcome = process_run("density", lambda cfg: CommandResult(passed=True), _cfg(None), _manifest_writer(tmp_path))
    assert outcome.exit_code == EXIT_OK
    assert not list(tmp_path.glob("*.db"))


def test_session_scope_rolls_back_on_error(tmp_path) -> None:
    factory = init_db(tmp_path / "runs.db")
    with pytest.raises(RuntimeError):
        with session_scope(factory) as session:
            session.add(Run(command="density", status="processing"))
            session.flush()
            raise RuntimeError("interrupted")
    with session_scope(factory) as session:
        session.add(Run(command="fit", status="completed"))
    with session_scope(factory) as session:
        assert [run.command for run in session.query(Run).all()] == ["fit"]
