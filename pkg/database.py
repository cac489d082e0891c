import logging
import os
from contextlib import contextmanager

from sqlalchemy import create_engine
from sqlalchemy.orm import DeclarativeBase, sessionmaker


class Base(DeclarativeBase):
    pass


_factories = {}


def init_db(db_path):
    """Open (creating if needed) the SQLite run ledger at db_path and return a session factory."""
    db_path = os.path.abspath(str(db_path))
    if db_path in _factories:
        return _factories[db_path]

    os.makedirs(os.path.dirname(db_path), exist_ok=True)
    engine = create_engine(f"sqlite:///{db_path}")

    # Register the mapped classes before creating tables
    import models  # noqa: F401

    # This creates tables if they don't exist
    Base.metadata.create_all(engine)
    factory = sessionmaker(bind=engine, expire_on_commit=False)
    _factories[db_path] = factory
    logging.getLogger("ledger").debug(f"Run ledger ready at {db_path}")
    return factory


@contextmanager
def session_scope(factory):
    """Session that commits when the block exits and rolls back if it raises."""
    session = factory()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
