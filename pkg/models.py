from datetime import datetime, timezone

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship

from database import Base


def _utcnow():
    return datetime.now(timezone.utc).replace(tzinfo=None)


class Run(Base):
    __tablename__ = "run"

    id = Column(Integer, primary_key=True)
    command = Column(String(20), nullable=False)
    status = Column(String(20), default="pending")  # pending, processing, completed, failed, error
    exit_code = Column(Integer, nullable=True)
    config_text = Column(Text, default="")
    manifest_path = Column(String(500), nullable=True)
    logs = Column(Text, default="")
    created_at = Column(DateTime, default=_utcnow)
    updated_at = Column(DateTime, default=_utcnow, onupdate=_utcnow)

    checks = relationship("CheckResult", backref="run", lazy=True, cascade="all, delete-orphan")


class CheckResult(Base):
    __tablename__ = "check_result"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("run.id"), nullable=False)
    name = Column(String(100), nullable=False)
    value = Column(Float, nullable=True)
    tolerance = Column(Float, nullable=True)
    passed = Column(Boolean, default=False)
